"""Named measures used by the CLI, the tests and the experiment scripts."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import InvalidRule
from .measure import ProductMeasure, measure_from_dict
from .rules import (
    Constant,
    DyadicBlocks,
    Geometric,
    Interleaved,
    Periodic,
    Power,
    Sinusoid,
    Table,
)


def _fair():
    return ProductMeasure(Constant(0.0), label="fair")


_BUILTINS: dict[str, tuple[Callable[[], ProductMeasure], str]] = {
    "fair": (_fair, "a_k = 0: the stationary fair coin"),
    "const-half": (lambda: ProductMeasure(Constant(0.5), label="const-half"), "a_k = 1/2 for k >= 1"),
    "first-half": (
        lambda: ProductMeasure(Table(np.array([0.5]), 0.0), label="first-half"),
        "a_1 = 1/2, every other a_k = 0",
    ),
    "inv-k": (
        lambda: ProductMeasure(Power(1.0, 1.0, start=2), label="inv-k"),
        "a_k = 1/k for k >= 2 (a_1 = 0 since |a_1| = 1 is singular)",
    ),
    "inv-k1": (lambda: ProductMeasure(Power(1.0, 1.0, shift=1.0), label="inv-k1"), "a_k = 1/(k+1)"),
    "inv-sqrt": (
        lambda: ProductMeasure(Power(1.0, 0.5, start=2), label="inv-sqrt"),
        "a_k = 1/sqrt(k) for k >= 2",
    ),
    "alternating": (
        lambda: ProductMeasure(Periodic((-0.5, 0.5)), label="alternating"),
        "a_k = (-1)^k / 2",
    ),
    "zero-half": (
        lambda: ProductMeasure(Periodic((0.0, 0.5)), label="zero-half"),
        "a_k alternates 0, 1/2",
    ),
    "step-third": (
        lambda: ProductMeasure(Interleaved(1.0 / 3.0, 0.0), label="step-third"),
        "a_k -> 1/3 along even k, a_k -> 0 along odd k",
    ),
    "sinusoid": (lambda: ProductMeasure(Sinusoid(), label="sinusoid"), "a_k = 0.3 sin(k)/k + 0.2"),
    "dyadic-sqrt": (
        lambda: ProductMeasure(DyadicBlocks(phase=1), label="dyadic-sqrt"),
        "0.9/sqrt(k) with alternating sign on odd dyadic blocks [2^j, 2^(j+1)), 0 on even ones",
    ),
    "dissipative": (
        lambda: ProductMeasure(
            Power(4.0, 1.0, start=5), label="dissipative", flags=("formula-starts-at-5",)
        ),
        "P_n(0) = 1/2 - 2/n from n = 5 on, 1/2 before",
    ),
    "dissipative-sqrt": (
        lambda: ProductMeasure(
            Power(4.0, 0.5, start=17), label="dissipative-sqrt", flags=("variant", "formula-starts-at-17")
        ),
        "P_n(0) = 1/2 - 2/sqrt(n) from n = 17 on, 1/2 before",
    ),
    "geometric-countable": (
        lambda: ProductMeasure(countable=Geometric(0.5, (), 0.5), label="geometric-countable"),
        "geometric(1/2) marginals on {0, 1, 2, ...}",
    ),
}


def builtin_names() -> list[str]:
    return sorted(_BUILTINS)


def describe(name: str) -> str:
    return _BUILTINS[name][1]


def builtin(name: str) -> ProductMeasure:
    if name.startswith("builtin:"):
        name = name[len("builtin:"):]
    try:
        return _BUILTINS[name][0]()
    except KeyError:
        raise InvalidRule(f"unknown builtin measure {name!r}; known: {builtin_names()}") from None


def resolve(source: str) -> ProductMeasure:
    """Builtin name (optionally prefixed ``builtin:``) or a path to a measure JSON file."""
    name = source[len("builtin:"):] if source.startswith("builtin:") else source
    if name in _BUILTINS:
        return _BUILTINS[name][0]()
    path = Path(source)
    if path.suffix == ".json" or path.exists():
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidRule(f"cannot read measure file {source}: {exc}") from None
        return measure_from_dict(doc)
    raise InvalidRule(f"unknown measure {source!r}; builtins: {builtin_names()}")


def random_table_measure(rng: np.random.Generator, length: int = 64, bound: float = 0.8) -> ProductMeasure:
    """Biases drawn uniformly from [-bound, bound] on 1..length, then a random constant tail."""
    a = rng.uniform(-bound, bound, size=length)
    tail = float(rng.uniform(-bound, bound))
    return ProductMeasure(Table(a, tail), label=f"random-table-{length}")

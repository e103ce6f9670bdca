"""Half-stationary product measures on {0,1}^Z (and countable alphabets).

Coordinates k <= 0 share the stationary past marginal (P_k(0) = past_bias);
coordinate k >= 1 has P_k(0) = (1 - a_k)/2 with a_k from a :class:`BiasRule`.
In countable mode the marginals come from a :class:`CountableRule` instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InvalidRule, PreconditionError, SingularMarginal
from .rules import (
    BiasRule,
    Categorical,
    Constant,
    CountableRule,
    countable_rule_from_dict,
    rule_from_dict,
)

SCHEMA_VERSION = 1
LOG2 = math.log(2.0)


@dataclass(frozen=True)
class Word:
    """Finite truncation (x_1, ..., x_H) of a one-sided configuration.

    ``symbols[k - 1]`` is the coordinate x_k.
    """

    symbols: tuple

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if any(s < 0 for s in self.symbols):
            raise PreconditionError("word symbols must be non-negative integers")

    @classmethod
    def from_string(cls, s: str) -> "Word":
        return cls(tuple(int(ch) for ch in s.strip()))

    @classmethod
    def from_array(cls, arr) -> "Word":
        return cls(tuple(int(v) for v in np.asarray(arr).ravel()))

    @property
    def horizon(self) -> int:
        return len(self.symbols)

    def __len__(self):
        return len(self.symbols)

    def __str__(self):
        if all(s < 10 for s in self.symbols):
            return "".join(str(s) for s in self.symbols)
        return ",".join(str(s) for s in self.symbols)

    def array(self) -> np.ndarray:
        return np.asarray(self.symbols, dtype=np.int64)

    def shifted(self, n: int) -> "Word":
        """sigma^n: drop the first n coordinates."""
        return Word(self.symbols[n:])


@dataclass(frozen=True)
class ProductMeasure:
    """A half-stationary product measure.

    ``offset`` re-indexes coordinates: coordinate k carries the marginal of
    k + offset.  It exists so that sigma^n-shifted evaluations can use the
    marginals of the coordinates they actually see.
    """

    rule: BiasRule = field(default_factory=Constant)
    past_bias: float = 0.5
    countable: CountableRule | None = None
    label: str = ""
    flags: tuple = ()
    offset: int = 0

    def __post_init__(self):
        if not 0 < self.past_bias < 1:
            raise InvalidRule("past_bias must lie in (0, 1)")
        if self.offset < 0:
            raise InvalidRule("offset must be >= 0")
        object.__setattr__(self, "flags", tuple(self.flags))

    # -- structure ---------------------------------------------------------

    @property
    def is_binary(self) -> bool:
        return self.countable is None

    @property
    def alphabet(self):
        if self.countable is None:
            return 2
        if isinstance(self.countable, Categorical):
            return self.countable.size
        return "countable"

    @property
    def past_a(self) -> float:
        """Bias of the stationary past, 1 - 2 * past_bias."""
        return 1.0 - 2.0 * self.past_bias

    def shifted(self, n: int) -> "ProductMeasure":
        return replace(self, offset=self.offset + n)

    def negated(self) -> "ProductMeasure":
        """Swap the roles of symbols 0 and 1 (a_k -> -a_k, p -> 1 - p)."""
        self._need_binary()
        return replace(self, rule=self.rule.negated(), past_bias=1.0 - self.past_bias)

    def _need_binary(self):
        if not self.is_binary:
            raise PreconditionError("operation defined for binary alphabets only")

    # -- binary marginals (vectorised over coordinate indices) -------------

    def bias(self, ks) -> np.ndarray:
        self._need_binary()
        ks = np.asarray(ks, dtype=np.int64) + self.offset
        out = np.full(ks.shape, self.past_a)
        fut = ks >= 1
        if np.any(fut):
            out[fut] = self.rule.values(ks[fut])
        return out

    def p1(self, ks) -> np.ndarray:
        return (1.0 + self.bias(ks)) / 2.0

    def p0(self, ks) -> np.ndarray:
        return (1.0 - self.bias(ks)) / 2.0

    def logp(self, ks) -> tuple[np.ndarray, np.ndarray]:
        """(log P_k(0), log P_k(1)) computed with log1p for accuracy."""
        a = self.bias(ks)
        if np.any(np.abs(a) >= 1):
            raise SingularMarginal("marginal with |a_k| = 1")
        return np.log1p(-a) - LOG2, np.log1p(a) - LOG2

    # tail bounds in measure coordinates (k >= 1)

    def envelope(self, k: int) -> float:
        return self.rule.tail_envelope(k + self.offset)

    def variation_tail(self, k: int) -> float:
        return self.rule.variation_tail(k + self.offset)

    def sq_variation_tail(self, k: int) -> float:
        return self.rule.sq_variation_tail(k + self.offset)

    # -- generic marginals --------------------------------------------------

    def log_pmf(self, k: int, symbols) -> np.ndarray:
        if self.is_binary:
            l0, l1 = self.logp(np.array([k]))
            s = np.asarray(symbols, dtype=np.int64)
            if np.any(s > 1):
                return np.where(s > 1, -np.inf, np.where(s == 1, l1[0], l0[0]))
            return np.where(s == 1, l1[0], l0[0])
        return self.countable.log_pmf(k + self.offset, symbols)


def hellinger_sq(a, b) -> np.ndarray:
    """Squared Hellinger term between binary marginals with biases a and b.

    sum_s (sqrt(P(s)) - sqrt(Q(s)))^2, written without cancellation:
    (P - Q)^2 / (sqrt(P) + sqrt(Q))^2 with P(0) - Q(0) = (b - a)/2.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff2 = ((a - b) / 2.0) ** 2
    s0 = (np.sqrt((1 - a) / 2) + np.sqrt((1 - b) / 2)) ** 2
    s1 = (np.sqrt((1 + a) / 2) + np.sqrt((1 + b) / 2)) ** 2
    return diff2 / s0 + diff2 / s1


def marginal(m: ProductMeasure, k: int, support: int | None = None, tol_support: float = 1e-10) -> np.ndarray:
    """Probability vector of coordinate k.

    Countable marginals are truncated to the smallest support {0..J-1} that
    covers mass >= 1 - tol_support, then renormalised.
    """
    if m.is_binary:
        a = float(m.bias(np.array([k]))[0])
        return np.array([(1 - a) / 2, (1 + a) / 2])
    J = support if support is not None else m.countable.support_size(k + m.offset, tol_support)
    with np.errstate(under="ignore"):
        v = np.exp(m.countable.log_pmf(k + m.offset, np.arange(J)))
    return v / v.sum()


def truncation_mass(m: ProductMeasure, k: int, support: int | None = None, tol_support: float = 1e-10) -> float:
    """Mass of coordinate k lying outside the truncated support."""
    if m.is_binary:
        return 0.0
    J = support if support is not None else m.countable.support_size(k + m.offset, tol_support)
    with np.errstate(under="ignore"):
        kept = float(np.exp(m.countable.log_pmf(k + m.offset, np.arange(J))).sum())
    return max(0.0, 1.0 - kept)


def cylinder_mass(m: ProductMeasure, c: Word | str, start: int = 1) -> float:
    """Mass of the cylinder {x : x_{start+i} = c_i}: an exact finite product."""
    if isinstance(c, str):
        c = Word.from_string(c)
    ks = np.arange(start, start + len(c))
    if not len(c):
        return 1.0
    if m.is_binary:
        s = c.array()
        if np.any(s > 1):
            return 0.0
        probs = np.where(s == 1, m.p1(ks), m.p0(ks))
        return math.prod(float(p) for p in probs)
    return math.exp(math.fsum(float(m.log_pmf(int(k), [s])[0]) for k, s in zip(ks, c.symbols)))


def log_cylinder_mass(m: ProductMeasure, c: Word, start: int = 1) -> float:
    ks = np.arange(start, start + len(c))
    return math.fsum(float(m.log_pmf(int(k), [s])[0]) for k, s in zip(ks, c.symbols))


# -- sampling -----------------------------------------------------------------


def sample_matrix(m: ProductMeasure, horizon: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``samples`` independent words of length ``horizon`` as rows.

    Uniforms are drawn coordinate-major, so the first H' columns of a longer
    draw coincide with a shorter draw from the same generator state.
    """
    if horizon < 1:
        raise PreconditionError("horizon must be >= 1")
    if samples < 1:
        raise PreconditionError("samples must be >= 1")
    U = rng.random((horizon, samples)).T
    ks = np.arange(1, horizon + 1)
    if m.is_binary:
        return (U < m.p1(ks)[None, :]).astype(np.uint8)
    X = np.empty((samples, horizon), dtype=np.int64)
    for j, k in enumerate(ks):
        cdf = np.cumsum(marginal(m, int(k)))
        X[:, j] = np.minimum(np.searchsorted(cdf, U[:, j], side="right"), cdf.size - 1)
    return X


def sample(m: ProductMeasure, horizon: int, rng: np.random.Generator) -> Word:
    return Word.from_array(sample_matrix(m, horizon, 1, rng)[0])


def block_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for work block ``index``; keyed on the index, never on scheduling."""
    return np.random.default_rng([int(seed), int(index)])


# -- series criteria ----------------------------------------------------------


@dataclass(frozen=True)
class SeriesReport:
    """Finite evidence about an infinite non-negative series."""

    partial_sum: float
    verdict: str  # converging | diverging | inconclusive
    kmax: int
    window_increments: tuple  # (sum over (kmax/4, kmax/2], sum over (kmax/2, kmax])
    tail_bound: float  # analytic bound on the neglected tail, inf if none
    truncation_mass: float = 0.0

    def to_dict(self) -> dict:
        return {
            "partial_sum": self.partial_sum,
            "verdict": self.verdict,
            "kmax": self.kmax,
            "window_increments": list(self.window_increments),
            "tail_bound": self.tail_bound,
            "truncation_mass": self.truncation_mass,
        }


def _series_verdict(terms: np.ndarray, kmax: int, tail_bound: float, tol_conv: float, offset_index: int) -> SeriesReport:
    # terms[i] is the term of index offset_index + i
    idx = np.arange(offset_index, offset_index + terms.size)
    cums = math.fsum(terms.tolist())
    w_prev = float(terms[(idx > kmax // 4) & (idx <= kmax // 2)].sum())
    w_last = float(terms[(idx > kmax // 2) & (idx <= kmax)].sum())
    if math.isfinite(tail_bound):
        verdict = "converging"
    elif w_last < tol_conv:
        verdict = "converging"
    elif w_last >= w_prev and w_last >= tol_conv:
        verdict = "diverging"
    else:
        verdict = "inconclusive"
    return SeriesReport(cums, verdict, kmax, (w_prev, w_last), tail_bound)


def _countable_h2(m: ProductMeasure, k1: int, k2: int, tol_support: float) -> float:
    J = max(
        m.countable.support_size(k1 + m.offset, tol_support),
        m.countable.support_size(k2 + m.offset, tol_support),
    )
    u = marginal(m, k1, J)
    v = marginal(m, k2, J)
    return float(np.sum((np.sqrt(u) - np.sqrt(v)) ** 2))


def nonsingularity_report(m: ProductMeasure, kmax: int, tol_conv: float = 1e-8, tol_support: float = 1e-10) -> SeriesReport:
    """Partial sum of sum_{k=0}^{kmax} H^2(P_k, P_{k+1}) with a convergence verdict.

    The shift is non-singular iff every |a_k| < 1 and this series converges.
    """
    if kmax < 1:
        raise PreconditionError("kmax must be >= 1")
    if not m.is_binary:
        stat = max(1, m.countable.stationary_from - m.offset)
        kk = range(0, kmax + 1)
        terms = np.array([_countable_h2(m, k, k + 1, tol_support) for k in kk])
        tail = 0.0 if kmax + 1 >= stat else math.inf
        trunc = max(truncation_mass(m, k, tol_support=tol_support) for k in range(0, min(kmax, stat) + 2))
        rep = _series_verdict(terms, kmax, tail, tol_conv, 0)
        return replace(rep, truncation_mass=trunc)
    ks = np.arange(0, kmax + 2)
    a = m.bias(ks)
    if np.any(np.abs(a) >= 1):
        bad = int(ks[np.argmax(np.abs(a) >= 1)])
        raise SingularMarginal(f"|a_{bad}| = 1: the shift is singular")
    terms = hellinger_sq(a[:-1], a[1:])
    v2 = m.sq_variation_tail(kmax + 1)
    e = m.envelope(kmax + 1)
    tail = v2 / (4 * (1 - e)) if math.isfinite(v2) else math.inf
    return _series_verdict(terms, kmax, tail, tol_conv, 0)


def acip_report(m: ProductMeasure, kmax: int, tol_conv: float = 1e-8, tol_support: float = 1e-10) -> SeriesReport:
    """Partial sum of sum_{k=1}^{kmax} (a_k - a_past)^2.

    With a fair past this is sum a_k^2, whose finiteness is equivalent to the
    existence of an absolutely continuous invariant probability.
    """
    if kmax < 1:
        raise PreconditionError("kmax must be >= 1")
    if not m.is_binary:
        stat = max(1, m.countable.stationary_from - m.offset)
        terms = np.array([_countable_h2(m, k, 0, tol_support) for k in range(1, kmax + 1)])
        tail = 0.0 if (kmax + 1 >= stat and _countable_h2(m, stat, 0, tol_support) == 0) else math.inf
        return _series_verdict(terms, kmax, tail, tol_conv, 1)
    ks = np.arange(1, kmax + 1)
    terms = (m.bias(ks) - m.past_a) ** 2
    tail = m.rule.sq_tail(kmax + 1 + m.offset) if m.past_a == 0 else math.inf
    return _series_verdict(terms, kmax, tail, tol_conv, 1)


# -- serialisation ------------------------------------------------------------


def measure_to_dict(m: ProductMeasure) -> dict:
    d = {
        "schema": "bernshift.measure",
        "version": SCHEMA_VERSION,
        "past_bias": m.past_bias,
        "alphabet": m.alphabet,
        "rule": m.rule.to_dict() if m.is_binary else m.countable.to_dict(),
    }
    if m.label:
        d["label"] = m.label
    if m.flags:
        d["flags"] = list(m.flags)
    if m.offset:
        d["offset"] = m.offset
    return d


def measure_from_dict(d: dict) -> ProductMeasure:
    if not isinstance(d, dict) or "rule" not in d:
        raise InvalidRule("measure document needs a 'rule' object")
    version = d.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise InvalidRule(f"unsupported measure schema version {version}")
    alphabet = d.get("alphabet", 2)
    common = dict(
        past_bias=float(d.get("past_bias", 0.5)),
        label=d.get("label", ""),
        flags=tuple(d.get("flags", ())),
        offset=int(d.get("offset", 0)),
    )
    if alphabet == 2 and d["rule"].get("kind") not in ("geometric", "categorical"):
        return ProductMeasure(rule=rule_from_dict(d["rule"]), **common)
    return ProductMeasure(countable=countable_rule_from_dict(d["rule"]), **common)


def probability_rows(m: ProductMeasure, ks: Sequence[int]) -> np.ndarray:
    """Binary marginals as an array of rows (P_k(0), P_k(1))."""
    ks = np.asarray(ks)
    return np.stack([m.p0(ks), m.p1(ks)], axis=1)

"""Bias rules k -> a_k for the future coordinates of a half-stationary measure.

A rule gives P_k(0) = (1 - a_k)/2 for k >= 1.  Besides the values themselves,
every rule exposes analytic tail bounds.  They are what turns the infinite
products and sums of the theory into finite computations with certified
error:

``tail_envelope(k)``
    upper bound on sup_{j>=k} |a_j| (non-increasing in k).
``variation_tail(k)``
    upper bound on sum_{j>=k} |a_{j+1} - a_j|.
``sq_variation_tail(k)``
    upper bound on sum_{j>=k} (a_{j+1} - a_j)^2.
``sq_tail(k)``
    upper bound on sum_{j>=k} a_j^2.
``tail_floor(k, center)``
    lower bound on inf_{j>=k} |a_j - center|.

``math.inf`` means "no finite bound is known", not "the series diverges".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from .errors import InvalidRule

_RULES: dict[str, type["BiasRule"]] = {}


def _register(cls):
    _RULES[cls.kind] = cls
    return cls


def _as_index_array(ks) -> np.ndarray:
    return np.asarray(ks, dtype=np.int64)


def _interval_distance(x: float, lo: float, hi: float) -> float:
    if lo > hi:
        lo, hi = hi, lo
    if x < lo:
        return lo - x
    if x > hi:
        return x - hi
    return 0.0


class BiasRule:
    """Base class.  Subclasses are frozen dataclasses registered by ``kind``."""

    kind: ClassVar[str] = ""

    def values(self, ks) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, k: int) -> float:
        return float(self.values(np.array([k]))[0])

    def tail_envelope(self, k: int) -> float:
        raise NotImplementedError

    def variation_tail(self, k: int) -> float:
        return math.inf

    def sq_variation_tail(self, k: int) -> float:
        return math.inf

    def sq_tail(self, k: int) -> float:
        return math.inf

    def tail_floor(self, k: int, center: float = 0.0) -> float:
        return 0.0

    def negated(self) -> "BiasRule":
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params()}

    def validate(self, scan: int = 10_000) -> None:
        """Reject rules with some |a_k| >= 1.

        The envelope at k = 1 bounds every value; a finite scan guards
        against envelopes that are themselves wrong.
        """
        env = self.tail_envelope(1)
        if not env < 1.0:
            raise InvalidRule(f"{self.kind}: tail_envelope(1) = {env} is not < 1")
        vals = self.values(np.arange(1, scan + 1))
        if not np.all(np.isfinite(vals)) or np.any(np.abs(vals) >= 1.0):
            bad = int(np.argmax(~(np.abs(vals) < 1.0))) + 1
            raise InvalidRule(f"{self.kind}: |a_{bad}| >= 1")


@_register
@dataclass(frozen=True)
class Constant(BiasRule):
    kind: ClassVar[str] = "constant"
    c: float = 0.0

    def __post_init__(self):
        if not abs(self.c) < 1:
            raise InvalidRule(f"constant bias {self.c} outside (-1, 1)")

    def values(self, ks):
        return np.full(_as_index_array(ks).shape, float(self.c))

    def tail_envelope(self, k):
        return abs(self.c)

    def variation_tail(self, k):
        return 0.0

    def sq_variation_tail(self, k):
        return 0.0

    def sq_tail(self, k):
        return 0.0 if self.c == 0 else math.inf

    def tail_floor(self, k, center=0.0):
        return abs(self.c - center)

    def negated(self):
        return Constant(-self.c)

    def params(self):
        return {"c": self.c}


@_register
@dataclass(frozen=True)
class Power(BiasRule):
    """a_k = c * (k + shift)^(-alpha) for k >= start, 0 before."""

    kind: ClassVar[str] = "power"
    c: float = 1.0
    alpha: float = 1.0
    shift: float = 0.0
    start: int = 1

    def __post_init__(self):
        if self.alpha <= 0:
            raise InvalidRule("power rule needs alpha > 0")
        if self.start < 1 or self.start + self.shift <= 0:
            raise InvalidRule("power rule needs start >= 1 and start + shift > 0")
        if not abs(self._at(self.start)) < 1:
            raise InvalidRule(f"power rule: |a_{self.start}| >= 1; raise start")

    def _at(self, k):
        return self.c * (k + self.shift) ** (-self.alpha)

    def values(self, ks):
        ks = _as_index_array(ks)
        out = np.zeros(ks.shape)
        on = ks >= self.start
        out[on] = self.c * (ks[on] + self.shift) ** (-self.alpha)
        return out

    def tail_envelope(self, k):
        return abs(self._at(max(k, self.start)))

    def _step(self, k):
        return abs(self._at(k) - self._at(k + 1))

    def variation_tail(self, k):
        s = abs(self._at(self.start))
        if k >= self.start:
            return abs(self._at(k))
        # jump 0 -> a_start, then monotone decay to 0
        return 2 * s

    def sq_variation_tail(self, k):
        # increments are non-increasing, so sum(d^2) <= d_k * sum(d)
        if k >= self.start:
            return abs(self._at(k)) * self._step(k)
        s = abs(self._at(self.start))
        return s * s + s * self._step(self.start)

    def sq_tail(self, k):
        if 2 * self.alpha <= 1:
            return math.inf
        x0 = max(k, self.start) + self.shift
        a = 2 * self.alpha
        return self.c**2 * (x0 ** (-a) + x0 ** (1 - a) / (a - 1))

    def tail_floor(self, k, center=0.0):
        lo = self._at(max(k, self.start))
        return _interval_distance(center, min(lo, 0.0), max(lo, 0.0))

    def negated(self):
        return Power(-self.c, self.alpha, self.shift, self.start)

    def params(self):
        return {"c": self.c, "alpha": self.alpha, "shift": self.shift, "start": self.start}


@_register
@dataclass(frozen=True)
class Periodic(BiasRule):
    """a_k = pattern[(k - 1) mod len(pattern)]."""

    kind: ClassVar[str] = "periodic"
    pattern: tuple = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "pattern", tuple(float(v) for v in self.pattern))
        if not self.pattern:
            raise InvalidRule("periodic rule needs a non-empty pattern")
        if max(abs(v) for v in self.pattern) >= 1:
            raise InvalidRule("periodic rule: pattern value outside (-1, 1)")

    def _constant(self):
        return len(set(self.pattern)) == 1

    def values(self, ks):
        ks = _as_index_array(ks)
        return np.asarray(self.pattern)[(ks - 1) % len(self.pattern)]

    def tail_envelope(self, k):
        return max(abs(v) for v in self.pattern)

    def variation_tail(self, k):
        return 0.0 if self._constant() else math.inf

    def sq_variation_tail(self, k):
        return 0.0 if self._constant() else math.inf

    def sq_tail(self, k):
        return 0.0 if all(v == 0 for v in self.pattern) else math.inf

    def tail_floor(self, k, center=0.0):
        return min(abs(v - center) for v in self.pattern)

    def negated(self):
        return Periodic(tuple(-v for v in self.pattern))

    def params(self):
        return {"pattern": list(self.pattern)}


@_register
@dataclass(frozen=True)
class Sinusoid(BiasRule):
    """a_k = amplitude * sin(frequency * k) / k + offset."""

    kind: ClassVar[str] = "sinusoid"
    amplitude: float = 0.3
    offset: float = 0.2
    frequency: float = 1.0

    def __post_init__(self):
        if not abs(self.offset) + abs(self.amplitude) < 1:
            raise InvalidRule("sinusoid rule: |offset| + |amplitude| must be < 1")

    def values(self, ks):
        ks = _as_index_array(ks).astype(float)
        return self.amplitude * np.sin(self.frequency * ks) / ks + self.offset

    def tail_envelope(self, k):
        return abs(self.offset) + abs(self.amplitude) / max(k, 1)

    def _step_const(self):
        # |a_{j+1} - a_j| <= _step_const / (j + 1)
        return abs(self.amplitude) * (min(2.0, abs(self.frequency)) + 1.0)

    def variation_tail(self, k):
        return 0.0 if self.amplitude == 0 else math.inf

    def sq_variation_tail(self, k):
        return self._step_const() ** 2 / max(k, 1)

    def sq_tail(self, k):
        if self.offset != 0:
            return math.inf
        k = max(k, 1)
        return self.amplitude**2 * (1.0 / k**2 + 1.0 / k)

    def tail_floor(self, k, center=0.0):
        r = abs(self.amplitude) / max(k, 1)
        return _interval_distance(center, self.offset - r, self.offset + r)

    def negated(self):
        return Sinusoid(-self.amplitude, -self.offset, self.frequency)

    def params(self):
        return {"amplitude": self.amplitude, "offset": self.offset, "frequency": self.frequency}


@_register
@dataclass(frozen=True)
class Interleaved(BiasRule):
    """a_k = limit * (1 - 1/k), with separate limits on even and odd k.

    Both subsequences converge, so the set of limit points is exactly
    {even_limit, odd_limit}.
    """

    kind: ClassVar[str] = "interleaved"
    even_limit: float = 1.0 / 3.0
    odd_limit: float = 0.0

    def __post_init__(self):
        if max(abs(self.even_limit), abs(self.odd_limit)) >= 1:
            raise InvalidRule("interleaved rule: limits must lie in (-1, 1)")

    def values(self, ks):
        ks = _as_index_array(ks)
        lim = np.where(ks % 2 == 0, self.even_limit, self.odd_limit)
        return lim * (1.0 - 1.0 / ks)

    def tail_envelope(self, k):
        return max(abs(self.even_limit), abs(self.odd_limit))

    def variation_tail(self, k):
        if self.even_limit != self.odd_limit:
            return math.inf
        return abs(self.even_limit) / max(k, 1)

    def sq_variation_tail(self, k):
        if self.even_limit != self.odd_limit:
            return math.inf
        k = max(k, 1)
        return self.even_limit**2 * (1.0 / k**4 + 1.0 / (3 * k**3))

    def sq_tail(self, k):
        return 0.0 if self.even_limit == self.odd_limit == 0 else math.inf

    def tail_floor(self, k, center=0.0):
        k = max(k, 1)
        return min(
            _interval_distance(center, lim * (1 - 1 / k), lim)
            for lim in (self.even_limit, self.odd_limit)
        )

    def negated(self):
        return Interleaved(-self.even_limit, -self.odd_limit)

    def params(self):
        return {"even_limit": self.even_limit, "odd_limit": self.odd_limit}


@_register
@dataclass(frozen=True)
class DyadicBlocks(BiasRule):
    """c * k^(-alpha) on active dyadic blocks [2^j, 2^(j+1)), zero elsewhere.

    Block j is active when j % period == phase; with ``alternate`` the sign
    flips between consecutive active blocks.
    """

    kind: ClassVar[str] = "dyadic"
    c: float = 0.9
    alpha: float = 0.5
    period: int = 2
    alternate: bool = True
    phase: int = 0

    def __post_init__(self):
        if not abs(self.c) < 1 or self.alpha <= 0 or self.period < 1:
            raise InvalidRule("dyadic rule needs |c| < 1, alpha > 0, period >= 1")
        if not 0 <= self.phase < self.period:
            raise InvalidRule("dyadic rule needs 0 <= phase < period")

    def values(self, ks):
        ks = _as_index_array(ks)
        block = np.floor(np.log2(ks)).astype(np.int64)
        # guard float log2 at exact powers of two
        block += (np.left_shift(1, block + 1) <= ks).astype(np.int64)
        block -= (np.left_shift(1, block) > ks).astype(np.int64)
        active = block % self.period == self.phase
        sign = np.where((block // self.period) % 2 == 1, -1.0, 1.0) if self.alternate else 1.0
        return np.where(active, sign * self.c * ks.astype(float) ** (-self.alpha), 0.0)

    def tail_envelope(self, k):
        return abs(self.c) * max(k, 1) ** (-self.alpha)

    def variation_tail(self, k):
        k = max(k, 1)
        return 3 * abs(self.c) * (k / 2) ** (-self.alpha) / (1 - 2 ** (-self.alpha))

    def sq_variation_tail(self, k):
        k = max(k, 1)
        return 2 * abs(self.c) * (k / 2) ** (-self.alpha) * self.variation_tail(k)

    def sq_tail(self, k):
        if 2 * self.alpha <= 1:
            return math.inf
        k = max(k, 1)
        a = 2 * self.alpha
        return self.c**2 * (k ** (-a) + k ** (1 - a) / (a - 1))

    def tail_floor(self, k, center=0.0):
        e = self.tail_envelope(k)
        return _interval_distance(center, -e, e)

    def negated(self):
        return DyadicBlocks(-self.c, self.alpha, self.period, self.alternate, self.phase)

    def params(self):
        return {"c": self.c, "alpha": self.alpha, "period": self.period, "alternate": self.alternate, "phase": self.phase}


@_register
@dataclass(frozen=True, eq=False)
class Table(BiasRule):
    """Explicit a_1..a_L followed by a constant tail."""

    kind: ClassVar[str] = "table"
    table: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tail: float = 0.0

    def __post_init__(self):
        v = np.array(self.table, dtype=float).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "table", v)
        if not abs(self.tail) < 1 or (v.size and not np.all(np.abs(v) < 1)):
            raise InvalidRule("table rule: every value must lie in (-1, 1)")
        full = np.append(v, self.tail)
        absv = np.abs(full)
        env = np.maximum.accumulate(absv[::-1])[::-1]
        step = np.diff(full)  # step[i] = a_{i+2} - a_{i+1}
        v1 = np.append(np.cumsum(np.abs(step)[::-1])[::-1], 0.0)
        v2 = np.append(np.cumsum((step**2)[::-1])[::-1], 0.0)
        sq = np.cumsum((v**2)[::-1])[::-1] if v.size else np.zeros(0)
        object.__setattr__(self, "_env", env)
        object.__setattr__(self, "_v1", v1)
        object.__setattr__(self, "_v2", v2)
        object.__setattr__(self, "_sq", np.append(sq, 0.0))

    def __eq__(self, other):
        return (
            isinstance(other, Table)
            and self.tail == other.tail
            and np.array_equal(self.table, other.table)
        )

    def __hash__(self):
        return hash((self.tail, self.table.tobytes()))

    @property
    def length(self) -> int:
        return int(self.table.size)

    def _idx(self, k):
        return min(max(k, 1), self.length + 1) - 1

    def values(self, ks):
        ks = _as_index_array(ks)
        out = np.full(ks.shape, float(self.tail))
        inside = (ks >= 1) & (ks <= self.length)
        out[inside] = self.table[ks[inside] - 1]
        return out

    def tail_envelope(self, k):
        return float(self._env[self._idx(k)])

    def variation_tail(self, k):
        return float(self._v1[self._idx(k)])

    def sq_variation_tail(self, k):
        return float(self._v2[self._idx(k)])

    def sq_tail(self, k):
        if self.tail != 0:
            return math.inf
        return float(self._sq[self._idx(k)])

    def tail_floor(self, k, center=0.0):
        i = self._idx(k)
        rest = self.table[i:]
        m = abs(self.tail - center)
        return float(min(m, np.min(np.abs(rest - center)))) if rest.size else m

    def negated(self):
        return Table(-self.table, -self.tail)

    def params(self):
        return {"values": [float(v) for v in self.table], "tail": float(self.tail)}


def rule_from_dict(d: dict) -> BiasRule:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _RULES:
        raise InvalidRule(f"unknown rule kind {kind!r}; known: {sorted(_RULES)}")
    if kind == "table":
        return Table(np.asarray(d.get("values", []), dtype=float), float(d.get("tail", 0.0)))
    if kind == "periodic":
        return Periodic(tuple(d["pattern"]))
    try:
        return _RULES[kind](**d)
    except TypeError as exc:
        raise InvalidRule(f"bad parameters for {kind}: {exc}") from None


def rule_kinds() -> list[str]:
    return sorted(_RULES)


# ---------------------------------------------------------------------------
# countable / finite alphabets


class CountableRule:
    """Marginals k -> probability vector on {0, 1, 2, ...}.

    Rules here are eventually stationary: marginals agree for all
    k >= ``stationary_from``, which makes shift-lag sums exact.
    """

    kind: ClassVar[str] = ""

    def log_pmf(self, k: int, symbols) -> np.ndarray:
        raise NotImplementedError

    def support_size(self, k: int, tol: float) -> int:
        raise NotImplementedError

    @property
    def stationary_from(self) -> int:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Geometric(CountableRule):
    """p_k(j) = (1 - q_k) q_k^j with q_k = past_ratio for k <= 0."""

    kind: ClassVar[str] = "geometric"
    past_ratio: float = 0.5
    ratios: tuple = ()
    tail_ratio: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(q) for q in self.ratios))
        for q in (self.past_ratio, self.tail_ratio, *self.ratios):
            if not 0 < q < 1:
                raise InvalidRule("geometric ratios must lie in (0, 1)")

    def ratio(self, k: int) -> float:
        if k <= 0:
            return self.past_ratio
        if k <= len(self.ratios):
            return self.ratios[k - 1]
        return self.tail_ratio

    def log_pmf(self, k, symbols):
        q = self.ratio(k)
        j = np.asarray(symbols, dtype=float)
        return math.log1p(-q) + j * math.log(q)

    def support_size(self, k, tol):
        q = self.ratio(k)
        return max(1, int(math.ceil(math.log(tol) / math.log(q))))

    @property
    def stationary_from(self):
        return len(self.ratios) + 1

    def to_dict(self):
        return {
            "kind": self.kind,
            "past_ratio": self.past_ratio,
            "ratios": list(self.ratios),
            "tail_ratio": self.tail_ratio,
        }


@dataclass(frozen=True)
class Categorical(CountableRule):
    """Finite alphabet {0..n-1}: past vector, explicit future vectors, tail vector."""

    kind: ClassVar[str] = "categorical"
    past: tuple = (0.5, 0.5)
    future: tuple = ()
    tail: tuple = (0.5, 0.5)

    def __post_init__(self):
        past = tuple(float(p) for p in self.past)
        future = tuple(tuple(float(p) for p in row) for row in self.future)
        tail = tuple(float(p) for p in self.tail)
        object.__setattr__(self, "past", past)
        object.__setattr__(self, "future", future)
        object.__setattr__(self, "tail", tail)
        n = len(past)
        for row in (past, tail, *future):
            if len(row) != n or min(row) < 0 or abs(sum(row) - 1) > 1e-12:
                raise InvalidRule("categorical rows must be probability vectors of equal size")

    @property
    def size(self) -> int:
        return len(self.past)

    def vector(self, k: int) -> tuple:
        if k <= 0:
            return self.past
        if k <= len(self.future):
            return self.future[k - 1]
        return self.tail

    def log_pmf(self, k, symbols):
        v = np.asarray(self.vector(k))
        with np.errstate(divide="ignore"):
            return np.log(v[np.asarray(symbols, dtype=np.int64)])

    def support_size(self, k, tol):
        return self.size

    @property
    def stationary_from(self):
        return len(self.future) + 1

    def to_dict(self):
        return {
            "kind": self.kind,
            "past": list(self.past),
            "future": [list(r) for r in self.future],
            "tail": list(self.tail),
        }



def countable_rule_from_dict(d: dict) -> CountableRule:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind == "geometric":
        return Geometric(float(d["past_ratio"]), tuple(d.get("ratios", ())), float(d["tail_ratio"]))
    if kind == "categorical":
        return Categorical(tuple(d["past"]), tuple(tuple(r) for r in d.get("future", ())), tuple(d["tail"]))
    raise InvalidRule(f"unknown countable rule kind {kind!r}")

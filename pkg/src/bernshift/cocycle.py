"""Radon-Nikodym derivatives of the shift and Hellinger statistics of P vs T^n_* P.

Everything is done in log space.  Infinite products become finite sums over
coordinates 1..K, where K is the smallest index whose neglected tail is
certified below ``tol`` by the rule's analytic tail bounds.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import HorizonTooShort, PreconditionError, SingularMarginal, ToleranceUnreachable
from .measure import ProductMeasure, Word, hellinger_sq, marginal, truncation_mass

DEFAULT_TOL = 1e-10
DEFAULT_MAX_INDEX = 1 << 22
KAKUTANI_LOWER = 0.5
_CHUNK = 1 << 22  # floats per weight block in batched evaluation


@dataclass(frozen=True)
class LogValue:
    """A natural-log quantity with a certified absolute error bound."""

    value: float
    err_bound: float = 0.0

    def __post_init__(self):
        if not self.err_bound >= 0:
            raise ValueError("err_bound must be >= 0")

    def __add__(self, other):
        if isinstance(other, LogValue):
            return LogValue(self.value + other.value, self.err_bound + other.err_bound)
        return LogValue(self.value + float(other), self.err_bound)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, LogValue):
            return LogValue(self.value - other.value, self.err_bound + other.err_bound)
        return LogValue(self.value - float(other), self.err_bound)

    def __neg__(self):
        return LogValue(-self.value, self.err_bound)

    def exp(self) -> float:
        return math.exp(self.value)

    def close_to(self, other, atol: float = 0.0) -> bool:
        ov = other.value if isinstance(other, LogValue) else float(other)
        oe = other.err_bound if isinstance(other, LogValue) else 0.0
        return abs(self.value - ov) <= self.err_bound + oe + atol

    def to_dict(self):
        return {"value": self.value, "err_bound": self.err_bound}


# -- truncation indices -------------------------------------------------------


def _smallest_index(bound, lo: int, max_index: int, tol: float) -> int | None:
    """Smallest K in [lo, max_index] with bound(K) <= tol, for non-increasing bound."""
    if bound(lo) <= tol:
        return lo
    if bound(max_index) > tol:
        return None
    good, bad = lo, lo
    step = 1
    while True:
        good = min(lo + step, max_index)
        if bound(good) <= tol:
            break
        bad = good
        step *= 2
    while good - bad > 1:
        mid = (good + bad) // 2
        if bound(mid) <= tol:
            good = mid
        else:
            bad = mid
    return good


def shift_tail_bound(m: ProductMeasure, n: int, K: int) -> float:
    """Bound on sum_{k>K} |log(P_{k-n}(x_k)/P_k(x_k))|, uniformly in x.

    Needs K >= n so that both indices are future coordinates.  Uses
    |log((1+a)/(1+b))| <= |a-b|/(1-e) and that each increment a_{j+1}-a_j
    enters at most n of the differences a_k - a_{k-n}.
    """
    j = K + 1 - n
    v1 = m.variation_tail(j)
    if v1 == 0:
        return 0.0
    return n * v1 / (1.0 - m.envelope(j))


def shift_certified_index(m: ProductMeasure, n: int, tol: float = DEFAULT_TOL, max_index: int = DEFAULT_MAX_INDEX) -> int:
    if not m.is_binary:
        return max(n, m.countable.stationary_from - m.offset + n - 1)
    K = _smallest_index(lambda K: shift_tail_bound(m, n, K), n, max(max_index, n), tol)
    if K is None:
        raise ToleranceUnreachable(
            f"no truncation index <= {max_index} certifies lag {n} to {tol:g} "
            f"(variation tail bound {m.variation_tail(max_index + 1 - n)})"
        )
    return K


def hellinger_tail_bounds(m: ProductMeasure, n: int, K: int) -> tuple[float, float]:
    """(bound on sum_{i>K} d_i, bound on sum_{i>K} -log rho_i) for lag n, K >= n."""
    j = K + 1 - n
    v2 = m.sq_variation_tail(j)
    if v2 == 0:
        return 0.0, 0.0
    d_tail = n * n * v2 / (4.0 * (1.0 - m.envelope(j)))
    if not math.isfinite(d_tail):
        return math.inf, math.inf
    half = d_tail / 2.0
    return d_tail, (half / (1.0 - half) if half < 1 else math.inf)


def hellinger_certified_index(m: ProductMeasure, n: int, tol: float = DEFAULT_TOL, max_index: int = DEFAULT_MAX_INDEX) -> int | None:
    if not m.is_binary:
        return max(n, m.countable.stationary_from - m.offset + n - 1)
    return _smallest_index(lambda K: max(hellinger_tail_bounds(m, n, K)), n, max(max_index, n), tol)


# -- log-probability tables ---------------------------------------------------


class _LogTable:
    """log P_k(0), log P_k(1) for k in [lo, hi], indexable by coordinate."""

    def __init__(self, m: ProductMeasure, lo: int, hi: int):
        self.lo = lo
        ks = np.arange(lo, hi + 1)
        a = m.bias(ks)
        if np.any(np.abs(a) >= 1):
            bad = int(ks[np.argmax(np.abs(a) >= 1)])
            raise SingularMarginal(f"|a_{bad}| = 1")
        self.l0 = np.log1p(-a) - math.log(2.0)
        self.l1 = np.log1p(a) - math.log(2.0)

    def rows(self, ks):
        i = np.asarray(ks) - self.lo
        return self.l0[i], self.l1[i]


def _shift_terms(table: _LogTable, n: int, K: int):
    """Per-coordinate log ratios r_k(s) = log P_{k-n}(s) - log P_k(s), k = 1..K."""
    ks = np.arange(1, K + 1)
    a0, a1 = table.rows(ks - n)
    b0, b1 = table.rows(ks)
    return a0 - b0, a1 - b1


def _horizon_plan(m: ProductMeasure, n: int, H: int, tol: float, max_index: int):
    """(number of summed coordinates, err_bound) for a word of horizon H."""
    K = shift_certified_index(m, n, tol, max_index)
    if H >= K:
        return K, shift_tail_bound(m, n, K)
    if not m.is_binary:
        raise HorizonTooShort(f"countable word of horizon {H} needs {K} symbols at lag {n}")
    # missing symbols: exact worst case over the gap (H, K], plus the certified tail
    t = _LogTable(m, H + 1 - n, K)
    r0, r1 = _shift_terms_range(t, n, H + 1, K)
    err = float(np.maximum(np.abs(r0), np.abs(r1)).sum()) + shift_tail_bound(m, n, K)
    if err > 10 * tol:
        raise HorizonTooShort(
            f"horizon {H} < certified index {K} at lag {n}; worst-case completion error {err:.3g} > 10*tol"
        )
    return H, err


def _shift_terms_range(table: _LogTable, n: int, k_lo: int, k_hi: int):
    ks = np.arange(k_lo, k_hi + 1)
    a0, a1 = table.rows(ks - n)
    b0, b1 = table.rows(ks)
    return a0 - b0, a1 - b1


# -- Radon-Nikodym derivative of T^n -----------------------------------------


def log_rn_shift(m: ProductMeasure, x: Word, n: int, tol: float = DEFAULT_TOL, max_index: int = DEFAULT_MAX_INDEX) -> LogValue:
    """log T^{n'}(x) = sum_{k>=1} log(P_{k-n}(x_k) / P_k(x_k))."""
    if n < 1:
        raise PreconditionError("lag n must be >= 1")
    if x.horizon < n:
        raise HorizonTooShort(f"word horizon {x.horizon} < lag {n}")
    if not m.is_binary:
        return _log_rn_shift_countable(m, x, n)
    K, err = _horizon_plan(m, n, x.horizon, tol, max_index)
    table = _LogTable(m, 1 - n, K)
    r0, r1 = _shift_terms(table, n, K)
    s = x.array()[:K]
    if np.any(s > 1):
        raise PreconditionError("binary measure evaluated on a non-binary word")
    terms = np.where(s == 1, r1, r0)
    return LogValue(math.fsum(terms.tolist()), err)


def _log_rn_shift_countable(m: ProductMeasure, x: Word, n: int) -> LogValue:
    K = shift_certified_index(m, n)
    if x.horizon < K:
        raise HorizonTooShort(f"countable word of horizon {x.horizon} needs {K} symbols at lag {n}")
    total = []
    for k, s in enumerate(x.symbols[:K], start=1):
        num = float(m.log_pmf(k - n, [s])[0])
        den = float(m.log_pmf(k, [s])[0])
        if den == -math.inf:
            raise SingularMarginal(f"symbol {s} has zero mass at coordinate {k}")
        total.append(num - den)
    return LogValue(math.fsum(total), 0.0)


def log_rn_shift_batch(
    m: ProductMeasure,
    X: np.ndarray,
    lags: Sequence[int] | int,
    tol: float = DEFAULT_TOL,
    max_index: int = DEFAULT_MAX_INDEX,
) -> tuple[np.ndarray, np.ndarray]:
    """log T^{n'} for every row of X (samples x horizon) and every lag.

    Returns (values[S, L], err_bounds[L]).  The per-lag evaluation is the
    affine map C_n + x . w_n, so a block of lags is one matrix product.
    """
    m_binary_only(m)
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    scalar = np.isscalar(lags)
    lags = np.atleast_1d(np.asarray(lags, dtype=np.int64))
    if lags.size == 0:
        return np.zeros((X.shape[0], 0)), np.zeros(0)
    if lags.min() < 1:
        raise PreconditionError("lags must be >= 1")
    S, H = X.shape
    if H < lags.max():
        raise HorizonTooShort(f"horizon {H} < lag {int(lags.max())}")
    plans = [_horizon_plan(m, int(n), H, tol, max_index) for n in lags]
    Ks = np.array([p[0] for p in plans])
    errs = np.array([p[1] for p in plans])
    Kmax = int(Ks.max())
    nmax = int(lags.max())
    table = _LogTable(m, 1 - nmax, Kmax)
    Xf = X[:, :Kmax].astype(np.float64)
    out = np.empty((S, lags.size))
    rows_per_chunk = max(1, _CHUNK // max(Kmax, 1))
    ks = np.arange(1, Kmax + 1)
    b0, b1 = table.rows(ks)
    for start in range(0, lags.size, rows_per_chunk):
        sl = slice(start, start + rows_per_chunk)
        ln = lags[sl]
        idx = ks[None, :] - ln[:, None]
        a0, a1 = table.rows(idx)
        r0 = a0 - b0[None, :]
        r1 = a1 - b1[None, :]
        # coordinates beyond each lag's summation index do not count
        mask = ks[None, :] <= Ks[sl][:, None]
        r0 = np.where(mask, r0, 0.0)
        r1 = np.where(mask, r1, 0.0)
        out[:, sl] = r0.sum(axis=1)[None, :] + Xf @ (r1 - r0).T
    if scalar:
        return out[:, 0], errs[:1]
    return out, errs


def m_binary_only(m: ProductMeasure):
    if not m.is_binary:
        raise PreconditionError("batched evaluation needs a binary alphabet")


def log_t_prime_batch(m: ProductMeasure, X: np.ndarray, K: int | None = None) -> np.ndarray:
    """log T'(x) per row, summed over the first K (default: all) coordinates, no certification."""
    m_binary_only(m)
    X = np.asarray(X)
    K = X.shape[1] if K is None else K
    table = _LogTable(m, 0, K)
    r0, r1 = _shift_terms(table, 1, K)
    return r0.sum() + X[:, :K].astype(np.float64) @ (r1 - r0)


# -- Hellinger affinity and Kakutani distance ---------------------------------


@dataclass(frozen=True)
class HellingerPoint:
    n: int
    log_rho: LogValue
    d: float
    d_err: float
    K: int

    @property
    def rho(self) -> float:
        return math.exp(self.log_rho.value)

    @property
    def neg_log_rho(self) -> float:
        return -self.log_rho.value

    @property
    def err_bound(self) -> float:
        return max(self.log_rho.err_bound, self.d_err)


@dataclass(frozen=True)
class HellingerCurve:
    entries: tuple = field(default_factory=tuple)

    def lags(self):
        return [e.n for e in self.entries]

    def rho(self) -> np.ndarray:
        return np.array([e.rho for e in self.entries])

    def neg_log_rho(self) -> np.ndarray:
        return np.array([e.neg_log_rho for e in self.entries])

    def d(self) -> np.ndarray:
        return np.array([e.d for e in self.entries])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "rho", "d", "neg_log_rho", "err_bound"])
        for e in self.entries:
            w.writerow([e.n, repr(e.rho), repr(e.d), repr(e.neg_log_rho), repr(e.err_bound)])
        return buf.getvalue()


def _coordinate_terms_from_bias(a: np.ndarray, n: int, K: int, past_a: float):
    """d_i for i = 1..K given a[i-1] = a_i (future only)."""
    cur = a[:K]
    prev = np.empty(K)
    if n < K:
        prev[n:] = a[: K - n]
    prev[: min(n, K)] = past_a
    return hellinger_sq(cur, prev)


def coordinate_terms(m: ProductMeasure, n: int, K: int) -> tuple[np.ndarray, np.ndarray]:
    """(rho_i, d_i) for coordinates i = 1..K, rho_i by direct summation.

    rho_i = sum_s sqrt(P_i(s) P_{i-n}(s)).  Coordinates i <= 0 all give
    rho_i = 1 and are omitted.
    """
    if m.is_binary:
        ks = np.arange(1, K + 1)
        p = np.stack([m.p0(ks), m.p1(ks)], axis=1)
        q = np.stack([m.p0(ks - n), m.p1(ks - n)], axis=1)
        rho_i = np.sqrt(p * q).sum(axis=1)
        d_i = hellinger_sq(m.bias(ks), m.bias(ks - n))
        return rho_i, d_i
    rho_i, d_i = [], []
    for i in range(1, K + 1):
        J = max(m.countable.support_size(i + m.offset, 1e-10), m.countable.support_size(i - n + m.offset, 1e-10))
        u, v = marginal(m, i, J), marginal(m, i - n, J)
        rho_i.append(float(np.sqrt(u * v).sum()))
        d_i.append(float(((np.sqrt(u) - np.sqrt(v)) ** 2).sum()))
    return np.array(rho_i), np.array(d_i)


def _hellinger_point(m, n, tol, max_index, strict, bias_cache=None, K=-1) -> tuple[HellingerPoint, np.ndarray]:
    if K == -1:
        K = hellinger_certified_index(m, n, tol, max_index)
    if K is None:
        if strict:
            raise ToleranceUnreachable(
                f"lag {n}: Hellinger tail not certified to {tol:g} within {max_index} coordinates"
            )
        K = max(max_index, n)
    if m.is_binary:
        a = bias_cache if bias_cache is not None and bias_cache.size >= K else m.bias(np.arange(1, K + 1))
        d_i = _coordinate_terms_from_bias(a, n, K, m.past_a)
        d_err, lr_err = hellinger_tail_bounds(m, n, K)
    else:
        _, d_i = coordinate_terms(m, n, K)
        d_err = lr_err = 0.0
    neg = -np.log1p(-d_i / 2.0)
    point = HellingerPoint(
        n=n,
        log_rho=LogValue(-float(np.sum(neg)), lr_err),
        d=float(np.sum(d_i)),
        d_err=d_err,
        K=K,
    )
    return point, d_i


def hellinger_affinity(
    m: ProductMeasure, n: int, tol: float = DEFAULT_TOL, max_index: int = DEFAULT_MAX_INDEX, strict: bool = True
) -> HellingerPoint:
    """rho(P, T^n_* P) as a product over coordinates; log rho carries the tail bound."""
    if n < 1:
        raise PreconditionError("lag n must be >= 1")
    return _hellinger_point(m, n, tol, max_index, strict)[0]


def hellinger_distance(
    m: ProductMeasure, n: int, tol: float = DEFAULT_TOL, max_index: int = DEFAULT_MAX_INDEX, strict: bool = True
) -> tuple[float, float]:
    """(d(P, T^n_* P), err_bound)."""
    p = hellinger_affinity(m, n, tol, max_index, strict)
    return p.d, p.d_err


def hellinger_curve(
    m: ProductMeasure,
    lags: Iterable[int],
    tol: float = DEFAULT_TOL,
    max_index: int = DEFAULT_MAX_INDEX,
    strict: bool = True,
) -> HellingerCurve:
    lags = sorted({int(n) for n in lags})
    if lags and lags[0] < 1:
        raise PreconditionError("lags must be >= 1")
    cache = None
    if m.is_binary and lags:
        Ks = [hellinger_certified_index(m, n, tol, max_index) for n in lags]
        Kmax = max(max(max_index, n) if K is None else K for K, n in zip(Ks, lags))
        cache = m.bias(np.arange(1, Kmax + 1))
    else:
        Ks = [-1] * len(lags)
    return HellingerCurve(
        tuple(_hellinger_point(m, n, tol, max_index, strict, cache, K)[0] for n, K in zip(lags, Ks))
    )


def kakutani_upper_constant(delta: float) -> float:
    """sup_{0 < x <= 1 - delta/2} -log(1-x)/x, attained at the endpoint."""
    return -math.log(delta / 2.0) / (2.0 - delta)


@dataclass(frozen=True)
class KakutaniRecord:
    n: int
    d: float
    neg_log_rho: float
    lower_ok: bool
    upper_ratio: float
    upper_constant: float
    upper_ok: bool | None  # None when the per-coordinate precondition fails
    precondition_violations: tuple
    err_bound: float

    def to_dict(self):
        return dict(self.__dict__, precondition_violations=list(self.precondition_violations))


def kakutani_check(
    m: ProductMeasure,
    lags: Iterable[int],
    delta: float = 0.1,
    tol: float = DEFAULT_TOL,
    max_index: int = DEFAULT_MAX_INDEX,
) -> list[KakutaniRecord]:
    """Check d/2 <= -log rho <= C(delta) d lag by lag.

    The lower bound holds term by term, so it is checked on the same finite
    sums; the upper bound is only asserted when every d_i <= 2 - delta.
    """
    if not 0 < delta < 2:
        raise PreconditionError("delta must lie in (0, 2)")
    C = kakutani_upper_constant(delta)
    out = []
    for n in sorted({int(v) for v in lags}):
        p, d_i = _hellinger_point(m, n, tol, max_index, strict=False)
        neg = p.neg_log_rho
        slack = 1e-12 * max(1.0, neg)
        lower_ok = neg >= KAKUTANI_LOWER * p.d - slack
        bad = tuple(int(i) + 1 for i in np.nonzero(d_i > 2 - delta)[0][:20])
        ratio = neg / p.d if p.d > 0 else 0.0
        upper_ok = None if bad else bool(neg <= C * p.d + slack)
        out.append(KakutaniRecord(n, p.d, neg, bool(lower_ok), ratio, C, upper_ok, bad, p.err_bound))
    return out


def countable_truncation_mass(m: ProductMeasure, K: int, tol_support: float = 1e-10) -> float:
    if m.is_binary:
        return 0.0
    return max(truncation_mass(m, k, tol_support=tol_support) for k in range(0, K + 1))

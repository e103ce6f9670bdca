"""Tail cocycle, essential-value certificates, bias limit points, holonomies."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cocycle import LogValue
from .errors import CertificateNotFound, PreconditionError, ZeroMassSymbol
from .measure import ProductMeasure, Word, block_rng, cylinder_mass, sample_matrix
from .odometer import _first_zero, odometer_step, phi_first_zero

def _log_rows(m: ProductMeasure, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
    """(log P_k(0), log P_k(1)) for k = lo..hi."""
    l0, l1 = m.logp(np.arange(lo, hi + 1))
    return l0, l1


# -- psi ------------------------------------------------------------------------


def _odometer_rows(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    phi, over = _first_zero(X)
    TX = X.copy()
    cols = np.arange(X.shape[1])
    ph = np.where(over, 1, phi)
    TX[cols[None, :] < (ph - 1)[:, None]] = 0
    TX[np.arange(X.shape[0]), ph - 1] = 1
    return TX, phi, over


def psi_batch(m: ProductMeasure, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """psi(x) = sum_{k<phi} [log T'(sigma^k x) - log T'(sigma^k tau x)] for every row.

    x and tau x agree beyond phi, so each pair of lag-1 derivatives is
    truncated at the same coordinate and the neglected tails cancel exactly.
    Returns (psi, phi, overflow); overflow rows hold nan.
    """
    X = np.asarray(X, dtype=np.uint8)
    S, H = X.shape
    TX, phi, over = _odometer_rows(X)
    out = np.full(S, np.nan)
    if (~over).any():
        fmax = int(phi[~over].max())
        l0, l1 = _log_rows(m, 0, fmax)
        # r_j(s) = log P_{j-1}(s) - log P_j(s), j = 1..fmax
        r0 = l0[:-1] - l0[1:]
        r1 = l1[:-1] - l1[1:]
        for f in np.unique(phi[~over]):
            rows = np.nonzero((phi == f) & ~over)[0]
            xs = X[rows, :f]
            ys = TX[rows, :f]
            acc = np.zeros(rows.size)
            for k in range(f):
                j = np.arange(1, f - k + 1)
                cx = xs[:, k:f]
                cy = ys[:, k:f]
                acc += (np.where(cx == 1, r1[j - 1], r0[j - 1]) - np.where(cy == 1, r1[j - 1], r0[j - 1])).sum(axis=1)
            out[rows] = acc
    return out, phi, over


def tail_cocycle_psi(m: ProductMeasure, x: Word) -> LogValue:
    phi_first_zero(x)  # raises on overflow
    val, _, _ = psi_batch(m, x.array()[None, :])
    return LogValue(float(val[0]), 0.0)


def psi_via_lag(m: ProductMeasure, x: Word) -> LogValue:
    """The same quantity as phi_phi(x) - phi_phi(tau x), with phi_n = log T^{n'}."""
    f = phi_first_zero(x)
    y = odometer_step(x).word
    l0, l1 = _log_rows(m, 1 - f, f)
    total = []
    for k in range(1, f + 1):
        # log P_{k-f}(s) - log P_k(s), at index positions shifted by f - 1
        def r(s):
            lp = l1 if s == 1 else l0
            return lp[k - 1] - lp[k + f - 1]

        total.append(r(x.symbols[k - 1]) - r(y.symbols[k - 1]))
    return LogValue(math.fsum(total), 0.0)


def tau_prime_batch(m: ProductMeasure, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """log tau' per row (nan on overflow) and the overflow mask."""
    X = np.asarray(X, dtype=np.uint8)
    phi, over = _first_zero(X)
    a = m.bias(np.arange(1, X.shape[1] + 1))
    L = np.log1p(a) - np.log1p(-a)
    cumL = np.concatenate([[0.0], np.cumsum(L)])
    ph = np.where(over, 1, phi)
    val = L[ph - 1] - cumL[ph - 1]
    return np.where(over, np.nan, val), over


@dataclass(frozen=True)
class PsiIdentityReport:
    samples: int
    used: int
    overflow: int
    max_deviation: float
    err_bound: float
    past_correction: float  # log((1-p)/p); the identity needs this to vanish

    @property
    def ok(self) -> bool:
        return self.max_deviation <= 1e-9 + self.err_bound

    def to_dict(self):
        return dict(self.__dict__, ok=self.ok)


def psi_identity_check(m: ProductMeasure, samples: int, rng: np.random.Generator, horizon: int = 64) -> PsiIdentityReport:
    """max |psi(x) - log tau'(x)| over sampled x.

    With a past bias p != 1/2 the two sides differ by (phi - 2) log((1-p)/p);
    that term is subtracted and reported so the check stays exact.
    """
    if samples < 1:
        raise PreconditionError("samples must be >= 1")
    X = sample_matrix(m, horizon, samples, rng)
    psi, phi, over = psi_batch(m, X)
    tp, _ = tau_prime_batch(m, X)
    corr = math.log((1 - m.past_bias) / m.past_bias)
    keep = ~over
    dev = np.abs(psi[keep] - tp[keep] - (phi[keep] - 2) * corr)
    return PsiIdentityReport(
        samples=samples,
        used=int(keep.sum()),
        overflow=int(over.sum()),
        max_deviation=float(dev.max()) if dev.size else 0.0,
        err_bound=0.0,
        past_correction=corr,
    )


# -- essential values -----------------------------------------------------------


def log_odds(a: float) -> float:
    return math.log1p(a) - math.log1p(-a)


@dataclass(frozen=True)
class EssentialValueCertificate:
    p: float
    t: float
    epsilon: float
    cylinder: Word
    rigidity_exponent: int  # n_k; the return time is 2^(n_k - 1)
    beta: float
    measured_mass_ratio: float
    a_nk: float
    t_nk: float
    mc: dict | None = None

    @property
    def n_k(self) -> int:
        return self.rigidity_exponent

    def to_dict(self) -> dict:
        d = {
            "p": self.p,
            "t": self.t,
            "epsilon": self.epsilon,
            "cylinder": str(self.cylinder),
            "n_k": self.n_k,
            "beta": self.beta,
            "mass_ratio": self.measured_mass_ratio,
            "a_nk": self.a_nk,
            "t_nk": self.t_nk,
            "return_time_log2": self.n_k - 1,
        }
        if self.mc is not None:
            d["monte_carlo"] = self.mc
        return d


def essential_value_certificate(
    m: ProductMeasure,
    p: float,
    epsilon: float,
    cylinder: Word | str,
    scan_max: int,
    mc_samples: int = 0,
    seed: int = 0,
) -> EssentialValueCertificate:
    """Witness that t = log((1+p)/(1-p)) is an approximate essential value.

    Picks the smallest n_k past the cylinder with |t_{n_k} - t| < epsilon and
    P_{n_k}(0) >= beta = (1-p)/4.  tau^(2^(n_k-1)) adds one at position n_k,
    so on C intersect [x_{n_k} = 0] it returns to C with log-derivative
    exactly t_{n_k}; that set has mass P_{n_k}(0) mass(C).
    """
    if not abs(p) < 1:
        raise PreconditionError("|p| must be < 1")
    if epsilon <= 0:
        raise PreconditionError("epsilon must be > 0")
    if isinstance(cylinder, str):
        cylinder = Word.from_string(cylinder)
    n = cylinder.horizon
    if n >= scan_max:
        raise PreconditionError("cylinder length must be < scan_max")
    t = log_odds(p)
    beta = (1 - p) / 4
    ks = np.arange(n + 1, scan_max + 1)
    a = m.bias(ks)
    tk = np.log1p(a) - np.log1p(-a)
    ok = (np.abs(tk - t) < epsilon) & ((1 - a) / 2 >= beta)
    if not ok.any():
        raise CertificateNotFound(
            f"no index in ({n}, {scan_max}] has log-odds within {epsilon} of {t:.6g} with P(0) >= {beta:.6g}",
            scanned_to=scan_max,
        )
    i = int(np.argmax(ok))
    nk = int(ks[i])
    a_nk = float(a[i])
    mass_c = cylinder_mass(m, cylinder)
    if mass_c == 0:
        raise ZeroMassSymbol("cylinder has zero mass")
    p0 = float(m.p0(np.array([nk]))[0])
    ratio = (mass_c * p0) / mass_c
    mc = _certificate_mc(m, cylinder, nk, t, epsilon, mc_samples, seed) if mc_samples else None
    return EssentialValueCertificate(p, t, epsilon, cylinder, nk, beta, ratio, a_nk, float(tk[i]), mc)


def _certificate_mc(m, cylinder, nk, t, epsilon, samples, seed) -> dict:
    """Sample x in C, apply tau^(2^(nk-1)) by carry, count returns with |log-derivative - t| < eps."""
    if samples * (nk + 64) > 1 << 29:
        raise PreconditionError("Monte Carlo cross-check: samples x horizon exceeds the memory budget")
    n = cylinder.horizon
    H = nk + 64
    X = sample_matrix(m, H, samples, block_rng(seed, 0))
    # condition on C by overwriting the prefix; the coordinates are independent
    X[:, :n] = np.asarray(cylinder.symbols, dtype=np.uint8)
    a = m.bias(np.arange(1, H + 1))
    L = np.log1p(a) - np.log1p(-a)
    phi, over = _first_zero(X[:, nk - 1:])
    cols = np.arange(H)
    flip = (cols[None, :] >= nk - 1) & (cols[None, :] < (nk - 1 + phi)[:, None]) & ~over[:, None]
    Y = X ^ flip.astype(np.uint8)
    deriv = (L[None, :] * (Y.astype(float) - X)).sum(axis=1)
    back = np.all(Y[:, :n] == X[:, :n], axis=1) & ~over
    hit = back & (np.abs(deriv - t) < epsilon)
    frac = float(hit.mean())
    return {
        "samples": samples,
        "seed": seed,
        "hit_fraction": frac,
        "stderr": math.sqrt(max(frac * (1 - frac), 1e-300) / samples),
        "exact_zero_branch_fraction": float((X[:, nk - 1] == 0).mean()),
    }


# -- limit points ---------------------------------------------------------------


@dataclass(frozen=True)
class LimitPointCandidate:
    value: float  # center of the merged cluster's busiest late bin
    interval: tuple  # (lo, hi) bin centers spanned by the merged cluster
    count: int
    upper_half_count: int
    last_index: int
    sample_indices: tuple

    def covers(self, v: float, tol: float) -> bool:
        return self.interval[0] - tol / 2 <= v <= self.interval[1] + tol / 2

    def to_dict(self):
        return dict(self.__dict__, interval=list(self.interval), sample_indices=list(self.sample_indices))


@dataclass(frozen=True)
class LimitPointReport:
    candidates: tuple
    contains_zero: bool
    zero_evidence: dict | None
    scan_max: int
    tol: float
    min_hits: int

    def values(self):
        return [c.value for c in self.candidates]

    def to_dict(self):
        return {
            "candidates": [c.to_dict() for c in self.candidates],
            "contains_zero": self.contains_zero,
            "zero_evidence": self.zero_evidence,
            "scan_max": self.scan_max,
            "tol": self.tol,
            "min_hits": self.min_hits,
        }


def limit_point_scan(m: ProductMeasure, scan_max: int = 100_000, tol: float = 1e-3, min_hits: int = 10) -> LimitPointReport:
    """Cluster a_1..a_scan_max in bins of width tol and keep the persistent ones.

    A bin qualifies with >= min_hits members, at least half of them in the
    upper half of the index range.  Adjacent qualifying bins merge into one
    candidate interval.
    """
    if scan_max < min_hits:
        raise PreconditionError("scan_max must be >= min_hits")
    if tol <= 0:
        raise PreconditionError("tol must be > 0")
    ks = np.arange(1, scan_max + 1)
    a = m.bias(ks)
    bins = np.rint(a / tol).astype(np.int64)
    uniq, inv, counts = np.unique(bins, return_inverse=True, return_counts=True)
    late = ks > scan_max // 2
    upper = np.bincount(inv, weights=late.astype(float), minlength=uniq.size).astype(int)
    good = np.nonzero((counts >= min_hits) & (2 * upper >= counts))[0]
    groups: list[list[int]] = []
    for j in good:
        if groups and uniq[j] == uniq[groups[-1][-1]] + 1:
            groups[-1].append(int(j))
        else:
            groups.append([int(j)])
    cands = []
    for g in groups:
        members = np.isin(inv, g)
        idx = ks[members]
        busiest = g[int(np.argmax(upper[g]))]
        cands.append(
            LimitPointCandidate(
                value=float(uniq[busiest] * tol),
                interval=(float(uniq[g[0]] * tol), float(uniq[g[-1]] * tol)),
                count=int(members.sum()),
                upper_half_count=int((members & late).sum()),
                last_index=int(idx.max()),
                sample_indices=tuple(int(v) for v in idx[-5:]),
            )
        )
    zero = [c for c in cands if c.covers(0.0, tol)]
    evidence = None
    if zero:
        c = zero[0]
        evidence = {"interval": list(c.interval), "count": c.count, "upper_half_count": c.upper_half_count, "last_index": c.last_index}
    return LimitPointReport(tuple(cands), bool(zero), evidence, scan_max, tol, min_hits)


# -- holonomies on countable alphabets -----------------------------------------


def holonomy_log_rn(m: ProductMeasure, a: Word | str, b: Word | str) -> LogValue:
    """log prod_k P_k(b_k)/P_k(a_k) for the map swapping the prefix a for b."""
    if isinstance(a, str):
        a = Word.from_string(a)
    if isinstance(b, str):
        b = Word.from_string(b)
    if a.horizon != b.horizon:
        raise PreconditionError("holonomy words must have equal length")
    parts = []
    for k, (u, v) in enumerate(zip(a.symbols, b.symbols), start=1):
        if u == v:
            continue
        lu = float(m.log_pmf(k, [u])[0])
        lv = float(m.log_pmf(k, [v])[0])
        if lu == -math.inf or lv == -math.inf:
            raise ZeroMassSymbol(f"coordinate {k}: symbol with zero mass")
        parts.append(lv - lu)
    return LogValue(math.fsum(parts), 0.0)

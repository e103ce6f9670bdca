"""Dissipativity certificates, Hopf sums, the flip bound and a Krieger-type report.

Only dissipativity can be certified: summable Hellinger affinities rho(n)
force it.  Conservativity is only ever Monte Carlo evidence (growing Hopf
sums).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .cocycle import (
    DEFAULT_TOL,
    hellinger_certified_index,
    hellinger_curve,
    log_rn_shift_batch,
    shift_certified_index,
)
from .errors import PreconditionError, ToleranceUnreachable
from .measure import ProductMeasure, Word, acip_report, hellinger_sq, nonsingularity_report, sample_matrix
from .mc import map_blocks
from .rules import Table
from .tail import limit_point_scan

ALL_LAGS_BUDGET = 5 * 10**7  # coordinate evaluations before switching to a lag grid


# -- dissipativity ----------------------------------------------------------------


@dataclass(frozen=True)
class GrowthFit:
    slope_n: float
    r2_n: float
    slope_log_n: float
    r2_log_n: float
    regime: str  # geometric | polynomial | flat
    lag_range: tuple

    def to_dict(self):
        return dict(self.__dict__, lag_range=list(self.lag_range))


def _r2_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss = float(((y - y.mean()) ** 2).sum())
    if ss <= 1e-300:
        return float(coef[0]), math.nan
    return float(coef[0]), 1.0 - float((resid**2).sum()) / ss


def growth_fit(lags: np.ndarray, neg_log_rho: np.ndarray) -> GrowthFit:
    """Least squares of -log rho(n) on n and on log n over the top half of the lags."""
    lags = np.asarray(lags, dtype=float)
    y = np.asarray(neg_log_rho, dtype=float)
    top = lags >= lags.max() / 2
    if top.sum() < 3:
        top = np.ones_like(top)
    x, yy = lags[top], y[top]
    s1, r1 = _r2_fit(x, yy)
    s2, r2 = _r2_fit(np.log(x), yy)
    if math.isnan(r1) or (abs(s1) * x.max() < 1e-12 and abs(s2) < 1e-12):
        regime = "flat"
    else:
        regime = "geometric" if r1 >= r2 else "polynomial"
    return GrowthFit(s1, r1, s2, r2, regime, (int(x.min()), int(x.max())))


@dataclass(frozen=True)
class DissipativityReport:
    nmax: int
    lag_mode: str  # all | grid
    lags: tuple
    rho: tuple
    neg_log_rho: tuple
    max_err_bound: float
    rho_partial_sum: float | None
    growth_fit: GrowthFit
    verdict: str
    fast_path: dict | None

    @property
    def certified(self) -> bool:
        return self.verdict == "dissipative-certified"

    def to_dict(self, include_table: bool = False):
        d = {
            "nmax": self.nmax,
            "lag_mode": self.lag_mode,
            "max_err_bound": self.max_err_bound,
            "rho_partial_sum": self.rho_partial_sum,
            "growth_fit": self.growth_fit.to_dict(),
            "verdict": self.verdict,
            "fast_path": self.fast_path,
            "rho_at_nmax": self.rho[-1],
        }
        if include_table:
            d["lags"] = list(self.lags)
            d["rho"] = list(self.rho)
        return d


def fast_path_certificate(m: ProductMeasure, probe_max: int) -> dict | None:
    """Analytic bound when |a_k - a_past| >= eps for all k >= N.

    Coordinates N..n then contribute d_i >= h(eps) each to d(P, T^n_* P), so
    -log rho(n) >= (n - N + 1) h / 2 and sum rho(n) converges geometrically.
    """
    if not m.is_binary:
        return None
    center = m.past_a
    N = 1
    while N <= max(probe_max, 1):
        eps = m.rule.tail_floor(N + m.offset, center)
        if eps > 0:
            hs = [float(hellinger_sq(center + s * eps, center)) for s in (1, -1) if abs(center + s * eps) < 1]
            h = min(hs)
            q = math.exp(-h / 2)
            return {
                "N": N,
                "epsilon": eps,
                "h": h,
                "decay_per_lag": q,
                "rho_sum_bound": (N - 1) + q / (1 - q),
            }
        N *= 2
    return None


def lag_plan(m: ProductMeasure, nmax: int, tol: float, max_index: int) -> tuple[str, list[int], int]:
    """(mode, lags, truncation cap).

    Uncertifiable tails are truncated at a budget-derived index and carry
    their (finite or infinite) error bound instead.
    """
    K = hellinger_certified_index(m, nmax, tol, max_index)
    if K is not None and nmax * K <= ALL_LAGS_BUDGET:
        return "all", list(range(1, nmax + 1)), max_index
    if nmax <= 256:
        mode, lags = "all", list(range(1, nmax + 1))
    else:
        grid = np.unique(np.rint(np.geomspace(1, nmax, 160)).astype(int))
        mode, lags = "grid", sorted(set(grid.tolist()) | {nmax})
    if K is None:
        return mode, lags, min(max_index, max(1 << 16, nmax, ALL_LAGS_BUDGET // len(lags)))
    return mode, lags, max_index


def dissipativity_certificate(
    m: ProductMeasure, nmax: int, tol: float = DEFAULT_TOL, max_index: int = 1 << 22
) -> DissipativityReport:
    if nmax < 10:
        raise PreconditionError("nmax must be >= 10")
    mode, lags, cap = lag_plan(m, nmax, tol, max_index)
    curve = hellinger_curve(m, lags, tol, cap, strict=False)
    rho = curve.rho()
    nlr = curve.neg_log_rho()
    fit = growth_fit(np.array(lags), nlr)
    fast = fast_path_certificate(m, nmax)
    partial = float(rho.sum()) if mode == "all" else None
    if fast is not None:
        verdict = "dissipative-certified"
    elif fit.regime == "geometric" and fit.r2_n >= 0.99 and fit.slope_n > 0 and rho[-1] < 1.0 / nmax**2:
        verdict = "summable-evidence"
    elif rho[-1] * nmax >= 1.0:
        # rho(n) >= 1/n at the end of the range: the series shows no sign of converging
        verdict = "not-dissipative-evidence"
    else:
        verdict = "inconclusive"
    return DissipativityReport(
        nmax=nmax,
        lag_mode=mode,
        lags=tuple(lags),
        rho=tuple(float(v) for v in rho),
        neg_log_rho=tuple(float(v) for v in nlr),
        max_err_bound=max(e.err_bound for e in curve.entries),
        rho_partial_sum=partial,
        growth_fit=fit,
        verdict=verdict,
        fast_path=fast,
    )


# -- Hopf sums --------------------------------------------------------------------


def checkpoints(N: int) -> list[int]:
    """1, 2, 5, 10, 20, 50, ... up to N, plus N."""
    out = []
    base = 1
    while base <= N:
        for mult in (1, 2, 5):
            if mult * base <= N:
                out.append(mult * base)
        base *= 10
    if out[-1] != N:
        out.append(N)
    return out


@dataclass(frozen=True)
class HopfTrace:
    N: int
    horizon: int
    checkpoints: tuple
    S: np.ndarray  # samples x checkpoints
    err_bound: float  # max per-term log error
    seed: int
    prefix_fallback: bool = False
    flags: tuple = ()

    def medians(self) -> np.ndarray:
        return np.median(self.S, axis=0)

    def quartiles(self) -> tuple[np.ndarray, np.ndarray]:
        return np.quantile(self.S, 0.25, axis=0), np.quantile(self.S, 0.75, axis=0)

    def at(self, n: int) -> np.ndarray:
        return self.S[:, self.checkpoints.index(n)]

    def growing_fraction(self, factor: float = 1.1) -> float:
        """Share of samples with S_N >= factor * S_{N'} for the last checkpoint N' <= N/2."""
        cps = np.array(self.checkpoints)
        prev = np.nonzero(cps <= self.N // 2)[0]
        if prev.size == 0:
            return math.nan
        j = int(prev[-1])
        return float(np.mean(self.S[:, -1] >= factor * self.S[:, j]))

    def plateau(self, lo: int | None = None, hi: int | None = None, rel: float = 0.01) -> bool:
        """(median S_hi - median S_lo) / median S_hi <= rel."""
        hi = hi or self.N
        lo = lo or max(1, hi // 10)
        ml = float(np.median(self.at(lo)))
        mh = float(np.median(self.at(hi)))
        return (mh - ml) / mh <= rel

    def summary(self) -> dict:
        q25, q75 = self.quartiles()
        return {
            "N": self.N,
            "horizon": self.horizon,
            "samples": int(self.S.shape[0]),
            "seed": self.seed,
            "checkpoints": list(self.checkpoints),
            "median": self.medians().tolist(),
            "q25": q25.tolist(),
            "q75": q75.tolist(),
            "growing_fraction": self.growing_fraction(),
            "err_bound": self.err_bound,
            "prefix_fallback": self.prefix_fallback,
            "flags": list(self.flags),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sample_id", "N", "S_N"])
        for i, row in enumerate(self.S):
            for n, v in zip(self.checkpoints, row):
                w.writerow([i, n, repr(float(v))])
        return buf.getvalue()


def hopf_horizon(m: ProductMeasure, N: int, tol: float = DEFAULT_TOL, max_index: int = 1 << 22) -> int:
    """Smallest horizon at which every lag 1..N is certified to tol."""
    Ks = [shift_certified_index(m, n, tol, max_index) for n in sorted({1, *checkpoints(N)})]
    return max(Ks + [N])


def _cumulative(logv: np.ndarray) -> np.ndarray:
    if logv.size and logv.max() < 700:
        return np.cumsum(np.exp(logv), axis=1)
    return np.logaddexp.accumulate(logv, axis=1)


def hopf_partial_sums(
    m: ProductMeasure,
    samples: int,
    N: int,
    seed: int,
    horizon: int | None = None,
    tol: float = DEFAULT_TOL,
    max_index: int = 1 << 22,
    block: int = 256,
    workers: int = 1,
) -> HopfTrace:
    """S_N(x) = sum_{n<=N} T^{n'}(x) for sampled x, at geometric checkpoints.

    The horizon is at least the certified truncation index of every lag, so
    each term is exact up to tol; envelope completion is never used here.
    """
    if samples < 1 or N < 1:
        raise PreconditionError("samples and N must be >= 1")
    need = hopf_horizon(m, N, tol, max_index)
    H = need if horizon is None else horizon
    if H < need:
        raise PreconditionError(f"horizon {H} below the certified index {need}")
    cps = checkpoints(N)
    lags = np.arange(1, N + 1)
    errs_seen = []

    def run(i, size, rng):
        X = sample_matrix(m, H, size, rng)
        vals, errs = log_rn_shift_batch(m, X, lags, tol, max_index)
        errs_seen.append(float(errs.max()))
        if vals.max() < 700:
            cum = np.cumsum(np.exp(vals), axis=1)
        else:
            cum = np.exp(np.minimum(np.logaddexp.accumulate(vals, axis=1), 709.0))
        return cum[:, np.array(cps) - 1]

    parts = map_blocks(run, samples, seed, block, workers)
    S = np.concatenate(parts, axis=0)
    return HopfTrace(N, H, tuple(cps), S, max(errs_seen), seed)


def prefix_measure(m: ProductMeasure, length: int) -> ProductMeasure:
    """a_1..a_length followed by the past bias: exact-tail stand-in for slow rules."""
    a = m.bias(np.arange(1, length + 1))
    return ProductMeasure(
        Table(a, m.past_a),
        past_bias=m.past_bias,
        label=f"{m.label or 'measure'}[prefix {length}]",
        flags=tuple(m.flags) + (f"prefix-{length}",),
    )


# -- flip bound ------------------------------------------------------------------


@dataclass(frozen=True)
class FlipCheck:
    delta: float
    bound: float
    ok: bool
    p_min: float
    c: float

    @property
    def lhs_ratio(self) -> float:
        return math.exp(self.delta)

    def to_dict(self):
        return dict(self.__dict__, lhs_ratio=self.lhs_ratio)


def flip_bound_check(m: ProductMeasure, x: Word, flips, n: int, p_floor: float = 1e-12) -> FlipCheck:
    """|log T^{n'}(w) - log T^{n'}(x)| <= 2 |flips| log(1/c), w = x with flips toggled.

    Only flipped coordinates differ, so the difference is a finite exact sum.
    c = p_min/(1 - p_min) with p_min the smallest marginal probability among
    the coordinates that enter (k and k - n for flipped k).
    """
    flips = sorted({int(k) for k in flips})
    if n < 1:
        raise PreconditionError("lag must be >= 1")
    if flips and (flips[0] < 1 or flips[-1] > x.horizon):
        raise PreconditionError("flip positions must lie in 1..horizon")
    if not flips:
        return FlipCheck(0.0, 0.0, True, 0.5, 1.0)
    ks = np.array(flips)
    involved = np.concatenate([ks, ks - n])
    a = m.bias(involved)
    p_min = float(np.min((1 - np.abs(a)) / 2))
    if p_min < p_floor:
        raise PreconditionError("marginals are not bounded away from 0 and 1")
    c = p_min / (1 - p_min)
    l0k, l1k = m.logp(ks)
    l0s, l1s = m.logp(ks - n)
    r0 = l0s - l0k
    r1 = l1s - l1k
    s = np.asarray([x.symbols[k - 1] for k in flips])
    if np.any(s > 1):
        raise PreconditionError("binary words only")
    delta = float(np.sum(np.where(s == 1, r0 - r1, r1 - r0)))
    bound = 2 * len(flips) * math.log(1 / c)
    return FlipCheck(delta, bound, abs(delta) <= bound * (1 + 1e-12), p_min, c)


# -- Krieger-type report ---------------------------------------------------------


@dataclass(frozen=True)
class Budgets:
    kmax: int = 1 << 20
    nmax: int = 200
    hopf_samples: int = 200
    hopf_N: int = 1000
    scan_max: int = 100_000
    limit_tol: float = 1e-3
    min_hits: int = 10
    tol: float = DEFAULT_TOL
    seed: int = 0

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if k != "seed" and not v > 0:
                raise PreconditionError(f"budget {k} must be positive")

    def to_dict(self):
        return dict(self.__dict__)


TYPE_GUESSES = ("II1", "III1", "dissipative", "inconclusive")


@dataclass(frozen=True)
class ClassificationReport:
    nonsingular: dict
    acip: dict
    dissipativity: dict
    type_guess: str
    certified: bool
    rationale: tuple
    evidence: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "nonsingular": self.nonsingular,
            "acip": self.acip,
            "dissipativity": self.dissipativity,
            "type_guess": self.type_guess,
            "certified": self.certified,
            "rationale": list(self.rationale),
            "evidence": self.evidence,
        }


def krieger_type_report(m: ProductMeasure, budgets: Budgets | None = None) -> ClassificationReport:
    b = budgets or Budgets()
    lines = []
    ns = nonsingularity_report(m, b.kmax)
    ac = acip_report(m, b.kmax)
    lines.append(f"non-singularity series: {ns.verdict} (partial sum {ns.partial_sum:.6g})")
    lines.append(f"sum of squared biases: {ac.verdict} (partial sum {ac.partial_sum:.6g})")
    evidence: dict = {}
    dis = dissipativity_certificate(m, b.nmax, b.tol) if m.is_binary else None
    if dis is not None:
        evidence["hellinger"] = dis.to_dict()
    hopf = None
    hopf_info: dict = {}
    if m.is_binary:
        target = m
        try:
            hopf_horizon(m, b.hopf_N, b.tol)
        except ToleranceUnreachable:
            target = prefix_measure(m, b.hopf_N + 64)
            hopf_info["prefix_fallback"] = True
            lines.append("Hopf sums use a finite prefix of the rule (tail not certifiable per sample)")
        hopf = hopf_partial_sums(target, b.hopf_samples, b.hopf_N, b.seed, tol=b.tol)
        hopf_info.update(hopf.summary())
        hopf_info["plateau"] = hopf.plateau()
        evidence["hopf"] = hopf_info
    lp = limit_point_scan(m, b.scan_max, b.limit_tol, b.min_hits) if m.is_binary else None
    if lp is not None:
        evidence["limit_points"] = lp.to_dict()

    if dis is not None and dis.certified:
        dissip = {"kind": "certificate", "direction": "dissipative"}
    elif hopf is not None and hopf.growing_fraction() >= 0.5 and not hopf_info["plateau"]:
        dissip = {"kind": "monte_carlo_evidence", "direction": "conservative"}
    elif hopf is not None and hopf_info["plateau"]:
        dissip = {"kind": "monte_carlo_evidence", "direction": "dissipative"}
    else:
        dissip = {"kind": "inconclusive", "direction": None}

    certified = False
    if ns.verdict == "diverging":
        guess = "inconclusive"
        lines.append("the non-singularity series looks divergent; no type is assigned")
    elif dissip["kind"] == "certificate":
        guess, certified = "dissipative", True
        lines.append("biases stay a fixed distance from the past bias: summable affinities certify dissipativity")
    elif ac.verdict == "converging":
        guess = "II1"
        certified = math.isfinite(ac.tail_bound) and math.isfinite(ns.tail_bound)
        lines.append("square-summable biases: an absolutely continuous invariant probability exists")
    elif (
        ac.verdict == "diverging"
        and dissip["direction"] == "conservative"
        and lp is not None
        and lp.contains_zero
    ):
        guess = "III1"
        lines.append("no invariant probability, growing Hopf sums and 0 is a bias limit point: type III1 guess")
    else:
        guess = "inconclusive"
        lines.append("evidence does not meet any rule of the decision table")
    lines.append("conservative shifts of this class are ergodic (cited implication, not tested)")
    if not certified:
        lines.append("verdict is a guess from finite evidence")
    return ClassificationReport(
        nonsingular=ns.to_dict(),
        acip=ac.to_dict(),
        dissipativity=dissip,
        type_guess=guess,
        certified=certified,
        rationale=tuple(lines),
        evidence=evidence,
    )

"""The two worked constructions: a dissipative rule and a scheduled conservative one.

The conservative construction glues blocks of a tent-shaped bias profile
between ever longer fair-coin windows.  Stage t places the profile with
exponent k_t on [m_{t-1}, n_t) and a fair window on [n_t, m_t), where

    n_t = m_{t-1} + 2^{k_t},    m_t = n_t + 2^{n_t},    m_0 = 0.

Windows explode after two stages, so the bias table is materialised only up
to ``max_index``; bigger schedules exist as integer metadata.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import builtin
from .classify import dissipativity_certificate
from .cocycle import DEFAULT_TOL, log_rn_shift, log_rn_shift_batch
from .errors import BudgetExhausted, HorizonTooShort, PreconditionError, RegimeViolation, StageInfeasible
from .mc import block_sizes
from .measure import ProductMeasure, Word, acip_report, sample_matrix
from .rules import Table

PRINTED_PEAK = 1.5  # lambda at the block centre as printed: peak P(1) = 3/5
STATED_PEAK = 3.0  # the value that gives the stated peak P(1) = 3/4
DEFAULT_MAX_INDEX = 1 << 20
DEFAULT_MAX_STAGE = 3

PEAK_FLAG = (
    "peak: the printed profile peaks at lambda = 3/2, so limsup P(1) = 3/5; "
    "the stated value 3/4 needs lambda = 3 (run with peak=3)"
)
TAYLOR_FLAG = (
    "taylor-step: 2 - sqrt(1-x) - sqrt(1+x) = x^2/4 + O(x^4) is second order; "
    "the claimed first-order term (2*sqrt(2)-1)/k is not observed"
)
INDEX_FLAG = "index-repair: n_t = m_{t-1} + 2^{k_t} (printed with m_t, which makes n_t > m_t)"
START_FLAG = "formula-starts-at-5: 1/2 - 2/n is not a probability for n = 2, 3, 4"


# -- dissipative example -----------------------------------------------------------


def dissipative_measure(variant: str = "printed") -> ProductMeasure:
    """P_n(0) = 1/2 - 2/n from n = 5 (``printed``) or 1/2 - 2/sqrt(n) from n = 17 (``sqrt``)."""
    names = {"printed": "dissipative", "sqrt": "dissipative-sqrt"}
    if variant not in names:
        raise PreconditionError(f"variant must be one of {sorted(names)}")
    return builtin(names[variant])


def taylor_table(ks=(10, 100, 1000, 10_000)) -> list[dict]:
    """2 - sqrt(1 - 2/k) - sqrt(1 + 2/k) next to the claimed and second-order terms."""
    rows = []
    for k in ks:
        x = 2.0 / k
        # cancellation-free form of 2 - sqrt(1-x) - sqrt(1+x)
        exact = x / (1 + math.sqrt(1 - x)) - x / (1 + math.sqrt(1 + x))
        claimed = (2 * math.sqrt(2) - 1) / k
        second = x * x / 4
        rows.append({
            "k": k,
            "value": exact,
            "claimed_first_order": claimed,
            "second_order": second,
            "ratio_to_claimed": exact / claimed,
            "ratio_to_second_order": exact / second,
        })
    return rows


def dissipative_growth_report(variant: str = "printed", nmax: int = 10_000, kmax: int = 1 << 20) -> dict:
    """Observed growth of -log rho(n) plus the discrepancy flags for the example."""
    m = dissipative_measure(variant)
    dis = dissipativity_certificate(m, nmax)
    ac = acip_report(m, kmax)
    fit = dis.growth_fit
    flags = [START_FLAG if variant == "printed" else "variant: 2/sqrt(n) rule, not the printed example",
             TAYLOR_FLAG]
    if ac.verdict == "converging":
        flags.append(
            "square-summable: sum a_k^2 converges, so the rule has an absolutely "
            "continuous invariant probability and cannot be dissipative"
        )
    return {
        "variant": variant,
        "label": m.label,
        "nmax": nmax,
        "observed_growth": {
            "regime": fit.regime,
            "slope_per_lag": fit.slope_n,
            "r2_linear": fit.r2_n,
            "slope_per_log_lag": fit.slope_log_n,
            "r2_log": fit.r2_log_n,
            "neg_log_rho_at_nmax": dis.neg_log_rho[-1],
        },
        "hellinger": dis.to_dict(),
        "acip": ac.to_dict(),
        "taylor": taylor_table(),
        "flags": flags,
    }


# -- tent profile --------------------------------------------------------------------


def lambda_profile(k: int, n, peak: float = PRINTED_PEAK):
    """Tent of height ``peak`` on [0, 2^k], centred at 2^(k-1); 1 elsewhere.

    With peak = 3/2 this is the printed 1 + n/2^k, 2 - n/2^k.  Both branches
    evaluate the same expression on min(n, 2^k - n), so the profile is exactly
    symmetric.
    """
    if k < 1:
        raise PreconditionError("k must be >= 1")
    half, full = 1 << (k - 1), 1 << k
    arr = np.asarray(n)
    if not np.issubdtype(arr.dtype, np.integer):
        raise PreconditionError("profile indices must be integers")
    inside = (arr >= 0) & (arr <= full)
    dist = np.where(arr <= half, arr, full - arr)
    out = np.where(inside, 1.0 + (peak - 1.0) * (dist / half), 1.0)
    return float(out) if out.ndim == 0 else out


def profile_bias(k: int, peak: float = PRINTED_PEAK) -> np.ndarray:
    """a_n = (lambda - 1)/(lambda + 1) for n = 1..2^k - 1, i.e. P(1) = lambda/(1 + lambda)."""
    lam = lambda_profile(k, np.arange(1, 1 << k), peak)
    return (lam - 1.0) / (lam + 1.0)


def pk_measure(k: int, peak: float = PRINTED_PEAK) -> ProductMeasure:
    return ProductMeasure(Table(profile_bias(k, peak), 0.0), label=f"profile-k{k}", flags=(f"peak={peak!r}",))


def peak_report(peak: float = PRINTED_PEAK) -> dict:
    return {
        "peak_lambda": peak,
        "peak_p1": peak / (1 + peak),
        "stated_peak_p1": 0.75,
        "stated_peak_lambda": STATED_PEAK,
        "flag": PEAK_FLAG,
    }


# -- small-derivative probe ----------------------------------------------------------


@dataclass(frozen=True)
class ProbeResult:
    k: int
    m: int
    t: int
    samples: int
    seed: int
    estimate: float
    stderr: float
    regime_ok: bool
    analytic_bound: dict | None = None

    @property
    def target(self) -> float:
        return 1.0 - 2.0 ** -self.t

    @property
    def passes(self) -> bool:
        return self.estimate - 3 * self.stderr >= self.target

    def to_dict(self):
        return {
            "k": self.k, "m": self.m, "t": self.t,
            "samples": self.samples, "seed": self.seed,
            "estimate": self.estimate, "stderr": self.stderr,
            "target": self.target, "passes": self.passes,
            "regime_ok": self.regime_ok,
            "analytic_bound": self.analytic_bound,
        }


def _derivative_moments(P: ProductMeasure, m: int, H: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact mean and variance of log T^{l'} for l = 1..m (independent coordinates)."""
    ks = np.arange(1, H + 1)
    l0, l1 = P.logp(ks)
    p = P.p1(ks)
    means, vars_ = np.empty(m), np.empty(m)
    for i, lag in enumerate(range(1, m + 1)):
        s0, s1 = P.logp(ks - lag)
        r0, r1 = s0 - l0, s1 - l1
        g = r1 - r0
        means[i] = r0.sum() + (p * g).sum()
        vars_[i] = (p * (1 - p) * g * g).sum()
    return means, vars_


def _analytic_route(P: ProductMeasure, k: int, m: int, t: int) -> dict:
    if m == 0:
        return {"lower_bound": 1.0, "union_failure": 0.0, "f_bound": 0.0, "per_lag_target": None}
    mu, var = _derivative_moments(P, m, (1 << k) - 1 + m)
    gap = mu + 2.0 ** -t
    # one-sided Chebyshev (Cantelli) per lag, then a union bound over lags
    fail = np.where(gap > 0, var / (var + np.maximum(gap, 1e-300) ** 2), 1.0)
    total = float(fail.sum())
    return {
        "lower_bound": max(0.0, 1.0 - total),
        "union_failure": total,
        "min_mean": float(mu.min()),
        "max_std": float(np.sqrt(var.max())),
        "f_bound": 3.0 * m * m / 2.0**k,
        "per_lag_target": math.exp(-t) / m,
        "max_per_lag_failure": float(fail.max()),
    }


def small_derivative_probe(
    k: int,
    m: int,
    t: int,
    samples: int = 2000,
    seed: int = 0,
    strict: bool = True,
    peak: float = PRINTED_PEAK,
    analytic: bool = True,
    block: int = 512,
) -> ProbeResult:
    """Estimate P^(k)(min_{l <= m} log T^{l'} >= -2^-t) by Monte Carlo.

    Samples are drawn coordinate-major from ``default_rng([seed, k, i])`` per
    block i, so longer horizons extend the same configurations.  That keeps
    estimates for different m and t comparable (common random numbers).
    """
    if k < 1 or m < 0 or t < 1 or samples < 1:
        raise PreconditionError("need k >= 1, m >= 0, t >= 1, samples >= 1")
    regime_ok = m < (1 << (k - 1))
    if strict and not regime_ok:
        raise RegimeViolation(f"m={m} is not below 2^(k-1)={1 << (k - 1)}")
    P = pk_measure(k, peak)
    if m == 0:
        est, se = 1.0, 0.0
    else:
        H = (1 << k) - 1 + m
        lags = np.arange(1, m + 1)
        floor = -(2.0 ** -t)
        good = 0
        for i, size in enumerate(block_sizes(samples, block)):
            X = sample_matrix(P, H, size, np.random.default_rng([seed, k, i]))
            vals, _ = log_rn_shift_batch(P, X, lags)
            good += int((vals.min(axis=1) >= floor).sum())
        est = good / samples
        se = math.sqrt(est * (1 - est) / samples)
    return ProbeResult(
        k=k, m=m, t=t, samples=samples, seed=seed, estimate=est, stderr=se,
        regime_ok=regime_ok,
        analytic_bound=_analytic_route(P, k, m, t) if analytic else None,
    )


@dataclass(frozen=True)
class ChooseKResult:
    k: int
    probe: ProbeResult
    tried: tuple  # (k, estimate, stderr) for every k examined

    def to_dict(self):
        return {"k": self.k, "probe": self.probe.to_dict(),
                "tried": [{"k": k, "estimate": e, "stderr": s} for k, e, s in self.tried]}


def choose_k(
    m: int,
    t: int,
    samples: int = 2000,
    seed: int = 0,
    k_max: int = 20,
    budget: float = 5e9,
    peak: float = PRINTED_PEAK,
) -> ChooseKResult:
    """Smallest k with m < 2^(k-1) whose probe clears 1 - 2^-t by three standard errors.

    ``budget`` caps samples * horizon * lags for a single probe.
    """
    tried = []
    for k in range(max(1, m.bit_length() + 1), k_max + 1):
        if m and samples * ((1 << k) + m) * m > budget:
            raise BudgetExhausted(f"probe at k={k} exceeds the budget; tried {tried}")
        probe = small_derivative_probe(k, m, t, samples, seed, peak=peak, analytic=False)
        tried.append((k, probe.estimate, probe.stderr))
        if probe.passes:
            return ChooseKResult(k, probe, tuple(tried))
    raise BudgetExhausted(f"no k <= {k_max} meets 1 - 2^-{t} for m={m}")


# -- schedule and prefix measure -------------------------------------------------------


@dataclass(frozen=True)
class WeirdStage:
    t: int
    k_t: int
    n_t: int
    m_t: int  # capped value when ``capped``
    capped: bool
    m_t_log2: float  # log2 of the uncapped m_t
    probe: dict | None = None

    def to_dict(self):
        return {"t": self.t, "k_t": self.k_t, "n_t": self.n_t, "m_t": self.m_t,
                "capped": self.capped, "m_t_log2": self.m_t_log2, "probe": self.probe}


@dataclass(frozen=True)
class WeirdSchedule:
    stages: tuple
    max_index: int
    max_stage: int
    peak: float
    flags: tuple = ()

    @property
    def t_max(self) -> int:
        return len(self.stages)

    def blocks(self) -> list[tuple[int, int, int]]:
        """(start, end, k) of every profile block [m_{t-1}, n_t)."""
        return _blocks(self.stages)

    def check(self) -> None:
        prev_m = 0
        for s in self.stages:
            if not (prev_m <= s.n_t - (1 << s.k_t) and 0 < s.n_t < s.m_t):
                raise AssertionError(f"stage {s.t} breaks the ordering")
            if not s.capped and s.m_t != s.n_t + (1 << s.n_t):
                raise AssertionError(f"stage {s.t}: m_t != n_t + 2^n_t")
            prev_m = s.m_t

    def to_dict(self):
        return {
            "stages": [s.to_dict() for s in self.stages],
            "caps": {"max_index": self.max_index, "max_stage": self.max_stage},
            "peak": self.peak,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class WeirdPrefix:
    measure: ProductMeasure
    schedule: WeirdSchedule

    @property
    def table_length(self) -> int:
        return self.measure.rule.length

    def bias_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "a_k"])
        for k, a in enumerate(self.measure.rule.table, start=1):
            w.writerow([k, repr(float(a))])
        return buf.getvalue()

    def extremes(self) -> dict:
        """liminf / limsup of P_j(1) over the materialised table and its fair tail."""
        p1 = (1 + np.append(self.measure.rule.table, 0.0)) / 2
        return {"liminf_p1": float(p1.min()), "limsup_p1": float(p1.max())}


def _stage(t: int, m_prev: int, k: int, max_index: int) -> WeirdStage:
    n_t = m_prev + (1 << k)
    if n_t >= max_index:
        raise StageInfeasible(f"stage {t}: n_t = {n_t} does not fit below max_index = {max_index}")
    capped = n_t >= max_index.bit_length() or n_t + (1 << n_t) > max_index
    m_t = max_index if capped else n_t + (1 << n_t)
    log2_m = math.log2(n_t + (1 << n_t)) if n_t < 1000 else float(n_t)
    return WeirdStage(t, k, n_t, m_t, capped, log2_m)


def weird_from_ks(ks, peak: float = PRINTED_PEAK, max_index: int = DEFAULT_MAX_INDEX,
                  probes=None) -> WeirdPrefix:
    """Materialise the construction for given block exponents k_1, k_2, ..."""
    ks = list(ks)
    if not ks or any(k < 1 for k in ks):
        raise PreconditionError("need at least one block exponent, all >= 1")
    stages, m_prev = [], 0
    for t, k in enumerate(ks, start=1):
        if stages and stages[-1].capped:
            raise StageInfeasible(f"stage {t} would start after a capped window")
        s = _stage(t, m_prev, k, max_index)
        if probes is not None:
            s = WeirdStage(**{**s.__dict__, "probe": probes[t - 1]})
        stages.append(s)
        m_prev = s.m_t
    table = np.zeros(stages[-1].n_t - 1)
    for lo, hi, k in _blocks(stages):
        j = np.arange(max(lo, 1), hi)
        lam = lambda_profile(k, j - lo, peak)
        table[j - 1] = (lam - 1) / (lam + 1)
    flags = [INDEX_FLAG]
    if peak == PRINTED_PEAK:
        flags.append(PEAK_FLAG)
    if stages[-1].capped:
        flags.append(f"capped: fair-coin tail from n_{len(stages)} on; window truncated at {max_index}")
    schedule = WeirdSchedule(tuple(stages), max_index, DEFAULT_MAX_STAGE, peak, tuple(flags))
    schedule.check()
    measure = ProductMeasure(Table(table, 0.0), label=f"weird-prefix-t{len(stages)}", flags=tuple(flags))
    return WeirdPrefix(measure, schedule)


def _blocks(stages) -> list[tuple[int, int, int]]:
    out, prev = [], 0
    for s in stages:
        out.append((prev, s.n_t, s.k_t))
        prev = s.m_t
    return out


def weird_conservative_prefix(
    t_max: int,
    max_index: int = DEFAULT_MAX_INDEX,
    max_stage: int = DEFAULT_MAX_STAGE,
    peak: float = PRINTED_PEAK,
    samples: int = 2000,
    seed: int = 0,
    k_max: int = 20,
) -> WeirdPrefix:
    """Build stages 1..t_max with k_t = choose_k(m_{t-1}, t)."""
    if t_max < 1:
        raise PreconditionError("t_max must be >= 1")
    if t_max > max_stage:
        raise StageInfeasible(f"t_max={t_max} exceeds max_stage={max_stage}")
    ks, probes, m_prev, prev_capped = [], [], 0, False
    for t in range(1, t_max + 1):
        if prev_capped:
            raise StageInfeasible(f"stage {t} would start after a window capped at {max_index}")
        if m_prev + (1 << (m_prev.bit_length() + 1)) >= max_index:
            raise StageInfeasible(f"stage {t}: any admissible block overruns max_index={max_index}")
        res = choose_k(m_prev, t, samples, seed, k_max, peak=peak)
        s = _stage(t, m_prev, res.k, max_index)
        ks.append(res.k)
        probes.append(res.probe.to_dict() | {"tried": [list(x) for x in res.tried]})
        m_prev, prev_capped = s.m_t, s.capped
    prefix = weird_from_ks(ks, peak, max_index, probes)
    return WeirdPrefix(prefix.measure, WeirdSchedule(prefix.schedule.stages, max_index, max_stage, peak,
                                                     prefix.schedule.flags))


# -- symbolic (uncapped) schedule ------------------------------------------------------

LOG2_3_2_UPPER = (117, 200)  # 0.585 > log2(3/2)
LOG2_6_5_UPPER = (2631, 10_000)  # 0.2631 > log2(6/5)


@dataclass(frozen=True)
class SymbolicStage:
    t: int
    k_t: int
    k_source: str  # probe | regime-lower-bound
    n_t: int
    m_t: int | None  # None when 2^{n_t} is too large to hold
    log2_m_t_lower: int


def symbolic_schedule(t_max: int = 3, peak: float = PRINTED_PEAK, samples: int = 2000, seed: int = 0,
                      probe_limit: int = 1 << 10) -> list[SymbolicStage]:
    """Uncapped integer schedule.  Stages whose m_{t-1} exceeds ``probe_limit`` use
    the smallest k allowed by m < 2^(k-1), a lower bound on the probed k."""
    if not 1 <= t_max <= 3:
        raise PreconditionError("symbolic schedules are available for t_max <= 3")
    out, m_prev = [], 0
    for t in range(1, t_max + 1):
        if m_prev <= probe_limit:
            k, src = choose_k(m_prev, t, samples, seed, peak=peak).k, "probe"
        else:
            k, src = m_prev.bit_length() + 1, "regime-lower-bound"
        n_t = m_prev + (1 << k)
        m_t = n_t + (1 << n_t) if n_t < 1 << 16 else None
        out.append(SymbolicStage(t, k, src, n_t, m_t, n_t))
        m_prev = m_t
    return out


def _ceil_mul(x: int, frac: tuple[int, int]) -> int:
    a, b = frac
    return -((-x * a) // b)


def symbolic_lower_bound_terms(stages) -> list[dict]:
    """log2 lower bounds of base^{n_{t-1}} (m_t - n_{t-1}) in exact integer arithmetic.

    m_t - n_{t-1} > 2^{n_t}, so log2(term) >= n_t - ceil(c n_{t-1}) with
    c an upper bound of -log2(base).
    """
    rows, n_prev = [], 0
    for s in stages:
        rows.append({
            "t": s.t,
            "n_t": s.n_t,
            "log2_term_lower_base_2_3": s.n_t - _ceil_mul(n_prev, LOG2_3_2_UPPER),
            "log2_term_lower_base_5_6": s.n_t - _ceil_mul(n_prev, LOG2_6_5_UPPER),
        })
        n_prev = s.n_t
    return rows


def terms_grow(rows, key: str = "log2_term_lower_base_2_3") -> bool:
    vals = [r[key] for r in rows]
    return all(b > a for a, b in zip(vals, vals[1:])) and vals[0] >= 0


# -- audits ------------------------------------------------------------------------------


@dataclass(frozen=True)
class FactorizationResult:
    t: int
    n: int
    lhs: float
    rhs: float
    printed: float
    err_bound: float

    @property
    def deviation(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def printed_gap(self) -> float:
        return self.lhs - self.printed

    @property
    def ok(self) -> bool:
        return self.deviation <= 1e-9 + self.err_bound

    def to_dict(self):
        return {"t": self.t, "n": self.n, "lhs": self.lhs, "rhs": self.rhs, "printed": self.printed,
                "deviation": self.deviation, "printed_gap": self.printed_gap, "ok": self.ok}


def _window_stage(schedule: WeirdSchedule, n: int) -> int:
    for s in schedule.stages:
        if s.n_t <= n < s.m_t:
            return s.t
    raise PreconditionError(f"lag {n} is not inside any fair window [n_t, m_t)")


def derivative_factorization_check(prefix: WeirdPrefix, n: int, x: Word, tol: float = DEFAULT_TOL) -> FactorizationResult:
    """Compare log T^{n'} with its block factorisation for n in a fair window [n_t, m_t).

    Grouping of sum_u log P_{u-n}(w_u)/P_u(w_u):
      * blocks k <= t sit entirely below n, so P_{u-n} = 1/2 there;
      * fair coordinates u < m_t whose source u - n lies in a block k <= t
        contribute log 2 P_{u-n}(w_u) (these image factors are absent from
        the printed form, reported as ``printed``);
      * blocks l > t contribute ratios over [m_{l-1}, n_l + n).
    """
    sched = prefix.schedule
    m = prefix.measure
    t = _window_stage(sched, n)
    need = prefix.table_length + n
    if x.horizon < need:
        raise HorizonTooShort(f"word horizon {x.horizon} < {need}")
    w = x.array()
    lhs = log_rn_shift(m, x, n, tol)

    def logp_at(idx, src):
        l0, l1 = m.logp(src)
        sym = w[idx - 1]
        return np.where(sym == 1, l1, l0)

    blocks = sched.blocks()
    log2 = math.log(2.0)
    own = 0.0
    image = 0.0
    for lo, hi, _ in blocks[:t]:
        u = np.arange(max(lo, 1), hi)
        own += float(np.sum(-log2 - logp_at(u, u)))
        upper = sched.stages[t - 1].m_t if t < len(blocks) else math.inf
        v = np.arange(max(lo, 1), hi)
        v = v[v + n < upper]
        image += float(np.sum(log2 + logp_at(v + n, v)))
    later = 0.0
    for lo, hi, _ in blocks[t:]:
        u = np.arange(lo, hi + n)
        later += float(np.sum(logp_at(u, u - n) - logp_at(u, u)))
    return FactorizationResult(t, n, lhs.value, own + image + later, own + later, lhs.err_bound)


def factorization_batch(prefix: WeirdPrefix, points: int = 1000, seed: int = 0, span: int = 4096) -> dict:
    """Random (n, x) pairs: n uniform in the first ``span`` lags of each window."""
    rng = np.random.default_rng([seed, 44])
    windows = [(s.n_t, min(s.m_t, s.n_t + span)) for s in prefix.schedule.stages]
    worst, worst_printed, fails = 0.0, 0.0, 0
    for i in range(points):
        lo, hi = windows[i % len(windows)]
        n = int(rng.integers(lo, hi))
        X = sample_matrix(prefix.measure, prefix.table_length + n, 1, rng)
        r = derivative_factorization_check(prefix, n, Word.from_array(X[0]))
        worst = max(worst, r.deviation)
        worst_printed = max(worst_printed, abs(r.printed_gap))
        fails += not r.ok
    return {"points": points, "max_deviation": worst, "max_printed_gap": worst_printed,
            "failures": fails, "ok": fails == 0}


@dataclass(frozen=True)
class AuditReport:
    rates: tuple  # dicts per stage
    lower_bound_terms: tuple
    extremes: dict
    flags: tuple
    samples: int
    seed: int

    def rates_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["t", "lags", "rate", "stderr", "target", "ok", "rate_literal", "stderr_literal"]
        w.writerow(cols)
        for r in self.rates:
            w.writerow([r[c] if not isinstance(r[c], float) else repr(r[c]) for c in cols])
        return buf.getvalue()

    def to_dict(self):
        return {"rates": list(self.rates), "lower_bound_terms": list(self.lower_bound_terms),
                "extremes": self.extremes, "flags": list(self.flags),
                "samples": self.samples, "seed": self.seed}


def _block_rates(prefix: WeirdPrefix, t: int, lags: int, samples: int, seed: int, block: int) -> dict:
    """Share of w whose block-t products stay >= -2^-t (log scale) for every lag k <= ``lags``.

    ``local`` treats sources u - k before the block as fair, the reading under
    which the product is the profile derivative the probe measured.
    ``literal`` uses the glued measure, where a source may sit in an earlier block.
    """
    if lags == 0:
        return {"local": (1.0, 0.0), "literal": (1.0, 0.0)}
    m = prefix.measure
    start, hi, _ = prefix.schedule.blocks()[t - 1]
    lo = max(start, 1)
    top = hi + lags  # last coordinate used
    u = np.arange(lo, top + 1)
    l0, l1 = m.logp(u)
    half = math.log(0.5)
    W, c = {}, {}
    for mode in ("local", "literal"):
        R0 = np.zeros((lags, u.size))
        R1 = np.zeros((lags, u.size))
        for i, k in enumerate(range(1, lags + 1)):
            s0, s1 = m.logp(u - k)
            if mode == "local":
                before = u - k < start
                s0, s1 = np.where(before, half, s0), np.where(before, half, s1)
            keep = u <= hi + k
            R0[i] = np.where(keep, s0 - l0, 0.0)
            R1[i] = np.where(keep, s1 - l1, 0.0)
        W[mode], c[mode] = (R1 - R0).T, R0.sum(axis=1)
    floor = -(2.0 ** -t)
    good = {"local": 0, "literal": 0}
    for i, size in enumerate(block_sizes(samples, block)):
        X = sample_matrix(m, top, size, np.random.default_rng([seed, t, i]))[:, lo - 1:].astype(float)
        for mode in good:
            good[mode] += int(((X @ W[mode] + c[mode]).min(axis=1) >= floor).sum())
    out = {}
    for mode, g in good.items():
        p = g / samples
        out[mode] = (p, math.sqrt(p * (1 - p) / samples))
    return out


def weird_conservativity_audit(prefix: WeirdPrefix, samples: int = 1000, seed: int = 0,
                               max_lags: int = 4096, block: int = 256) -> AuditReport:
    """Membership rates of the sets A_t and the explicit lower-bound terms.

    A_t is read on block t with lags up to m_{t-1}, the lag range k_t was
    chosen for.  Both the block-local and the literal product are reported.
    """
    sched = prefix.schedule
    if not sched.stages:
        raise PreconditionError("schedule has no complete stage")
    rates, flags = [], list(sched.flags)
    m_prev = 0
    for s in sched.stages:
        lags = min(m_prev, max_lags)
        if lags < m_prev:
            flags.append(f"A_{s.t}: lags truncated to {max_lags} of {m_prev}")
        r = _block_rates(prefix, s.t, lags, samples, seed, block)
        (p, se), (pl, sel) = r["local"], r["literal"]
        target = 1 - 2.0 ** -s.t
        rates.append({"t": s.t, "lags": lags, "rate": p, "stderr": se, "target": target,
                      "ok": p >= target - 3 * se, "rate_literal": pl, "stderr_literal": sel})
        if abs(p - pl) > 3 * max(se, sel, 1e-12):
            flags.append(f"A_{s.t}: sources in earlier blocks change the rate ({p:.4f} local, {pl:.4f} literal)")
        m_prev = s.m_t
    base_profile = (1 + sched.peak) / (2 * sched.peak)  # 1 / (2 max P(1))
    terms, n_prev = [], 0
    acc = {"2_3": -math.inf, "profile": -math.inf}
    for s in sched.stages:
        window = s.m_t - n_prev
        lt = n_prev * math.log10(2 / 3) + math.log10(window)
        lp = n_prev * math.log10(base_profile) + math.log10(window)
        acc["2_3"] = float(np.logaddexp(acc["2_3"] * math.log(10), lt * math.log(10)) / math.log(10))
        acc["profile"] = float(np.logaddexp(acc["profile"] * math.log(10), lp * math.log(10)) / math.log(10))
        terms.append({"t": s.t, "n_prev": n_prev, "window": window, "capped": s.capped,
                      "log10_term_base_2_3": lt, "log10_term_profile_base": lp,
                      "profile_base": base_profile,
                      "log10_partial_sum_base_2_3": acc["2_3"],
                      "log10_partial_sum_profile_base": acc["profile"]})
        n_prev = s.n_t
    ext = prefix.extremes() | {"stated_limsup_p1": 0.75, "profile_limsup_p1": sched.peak / (1 + sched.peak)}
    if PEAK_FLAG not in flags and sched.peak == PRINTED_PEAK:
        flags.append(PEAK_FLAG)
    return AuditReport(tuple(rates), tuple(terms), ext, tuple(flags), samples, seed)

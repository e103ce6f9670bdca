"""Fast invariant suite behind ``bernshift selftest``.

Each check returns (ok, details).  Details hold only seed-determined numbers,
never timings, so two runs with one seed write identical reports.
"""

from __future__ import annotations

import math

import numpy as np

from .catalog import builtin, random_table_measure
from .classify import flip_bound_check, hopf_partial_sums
from .cocycle import hellinger_affinity, hellinger_distance, kakutani_check, log_rn_shift
from .examples import (
    factorization_batch,
    lambda_profile,
    weird_conservative_prefix,
    weird_conservativity_audit,
)
from .maharam import skew_orbit
from .measure import ProductMeasure, Word, cylinder_mass, marginal, sample, sample_matrix
from .odometer import odometer_property_check, rigidity_batch, transport_check
from .rules import Constant, Power, Sinusoid, Table
from .tail import essential_value_certificate, psi_identity_check

FIRST_HALF = ProductMeasure(Table(np.array([0.5]), 0.0), label="first-half")


def _close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def check_marginals(seed):
    got = {
        "fair_k5": marginal(builtin("fair"), 5).tolist(),
        "half_k3": marginal(builtin("const-half"), 3).tolist(),
        "past_k-7": marginal(builtin("inv-k"), -7).tolist(),
    }
    ok = got["fair_k5"] == [0.5, 0.5] and got["half_k3"] == [0.25, 0.75] and got["past_k-7"] == [0.5, 0.5]
    return ok, got


def check_cylinders(seed):
    vals = [
        cylinder_mass(builtin("fair"), "0110"),
        cylinder_mass(FIRST_HALF, "0"),
        cylinder_mass(FIRST_HALF, "00"),
    ]
    return vals == [1 / 16, 1 / 4, 1 / 8], {"masses": vals}


def check_shift_derivative(seed):
    a = log_rn_shift(FIRST_HALF, Word.from_string("01"), 1).value
    b = log_rn_shift(FIRST_HALF, Word.from_string("00"), 1).value
    return _close(a, math.log(3)) and _close(b, 0.0), {"x=01": a, "x=00": b}


def check_hellinger(seed):
    rho = hellinger_affinity(FIRST_HALF, 1).rho
    d, _ = hellinger_distance(FIRST_HALF, 1)
    half = hellinger_affinity(builtin("const-half"), 1).rho
    ok = _close(rho, (2 + math.sqrt(3)) / 4) and _close(d, 0.13629669484372686, 1e-12) and abs(half - 0.96593) < 1e-5
    return ok, {"rho_first_half": rho, "d_first_half": d, "rho_const_half": half}


def check_kakutani(seed):
    rng = np.random.default_rng([seed, 4])
    worst = math.inf
    for _ in range(20):
        m = random_table_measure(rng, 32, 0.9)
        for r in kakutani_check(m, range(1, 51)):
            worst = min(worst, r.neg_log_rho - r.d / 2)
            if not r.lower_ok:
                return False, {"min_slack": worst}
    return True, {"measures": 20, "lags": 50, "min_slack": worst}


def check_psi(seed):
    rules = {
        "fair": ProductMeasure(Constant(0.0)),
        "const-half": ProductMeasure(Constant(0.5)),
        "inv-k1": ProductMeasure(Power(1.0, 1.0, shift=1.0)),
        "sinusoid": ProductMeasure(Sinusoid()),
        "first-half": FIRST_HALF,
    }
    out, ok = {}, True
    for i, (name, m) in enumerate(rules.items()):
        r = psi_identity_check(m, 2000, np.random.default_rng([seed, 1, i]))
        out[name] = r.max_deviation
        ok &= r.ok
    return bool(ok), out


def check_odometer(seed):
    res = {N: odometer_property_check(N) for N in range(1, 13)}
    return all(res.values()), {"N_max": 12}


def check_rigidity(seed):
    m = builtin("inv-k1")
    rng = np.random.default_rng([seed, 3])
    worst, fixed = 0.0, True
    for n in range(1, 17):
        X = sample_matrix(m, n + 40, 200, rng)
        b = rigidity_batch(m, X, n)
        worst = max(worst, b.max_deviation)
        fixed &= bool(b.fix_ok[~b.overflow].all())
    return worst <= 1e-10 and fixed, {"max_deviation": worst, "n_max": 16}


def check_transport(seed):
    r = transport_check(builtin("inv-k1"), 8)
    return bool(r["ok"]), {"max_rel_error": r["max_rel_error"]}


def check_flips(seed):
    rng = np.random.default_rng([seed, 7])
    worst = 0.0
    for _ in range(300):
        m = random_table_measure(rng, 40, 0.8)
        x = sample(m, 60, rng)
        flips = rng.choice(np.arange(1, 61), size=int(rng.integers(1, 6)), replace=False)
        r = flip_bound_check(m, x, flips, int(rng.integers(1, 30)))
        worst = max(worst, abs(r.delta) / r.bound if r.bound else 0.0)
        if not r.ok:
            return False, {"worst_ratio": worst}
    return True, {"trials": 300, "worst_ratio": worst}


def check_hopf(seed):
    tr = hopf_partial_sums(builtin("fair"), 20, 200, seed)
    exact = bool(np.all(tr.S == np.array(tr.checkpoints, dtype=float)[None, :]))
    return exact, {"N": 200, "samples": 20}


def check_certificate(seed):
    c = essential_value_certificate(builtin("step-third"), 1 / 3, 0.05, "01", 100_000)
    ok = c.measured_mass_ratio >= c.beta and abs(c.t_nk - math.log(2)) < 0.05
    return ok, {"n_k": c.n_k, "mass_ratio": c.measured_mass_ratio, "beta": c.beta}


def check_examples(seed):
    fx = [lambda_profile(4, 0), lambda_profile(4, 8), lambda_profile(4, 16)]
    n = np.arange(0, 17)
    sym = bool(np.array_equal(lambda_profile(4, n), lambda_profile(4, 16 - n)))
    prefix = weird_conservative_prefix(1, samples=500, seed=seed)
    audit = weird_conservativity_audit(prefix, samples=500, seed=seed)
    fac = factorization_batch(prefix, 200, seed)
    ok = fx == [1.0, 1.5, 1.0] and sym and all(r["ok"] for r in audit.rates) and fac["ok"]
    return ok, {"lambda": fx, "symmetric": sym, "A_rates": [r["rate"] for r in audit.rates],
                "factorization_max_deviation": fac["max_deviation"]}


def check_maharam(seed):
    m = builtin("const-half")
    x = sample(m, 80, np.random.default_rng([seed, 9]))
    orbit = skew_orbit(m, x, 10)
    direct = log_rn_shift(m, x, 10).value
    dev = abs(orbit[-1].height - direct)
    return dev <= 1e-10 + orbit[-1].err_accum, {"deviation": dev}


CHECKS = {
    "marginals": check_marginals,
    "cylinders": check_cylinders,
    "shift_derivative": check_shift_derivative,
    "hellinger": check_hellinger,
    "kakutani_lower": check_kakutani,
    "psi_identity": check_psi,
    "odometer_property": check_odometer,
    "rigidity": check_rigidity,
    "transport": check_transport,
    "flip_bound": check_flips,
    "hopf_fair": check_hopf,
    "certificate": check_certificate,
    "examples": check_examples,
    "maharam_cocycle": check_maharam,
}


def run_selftest(seed: int, only=None) -> list[dict]:
    out = []
    for name, fn in CHECKS.items():
        if only and name not in only:
            continue
        try:
            ok, details = fn(seed)
        except Exception as exc:  # a crashing check is a failing check
            ok, details = False, {"error": f"{type(exc).__name__}: {exc}"}
        out.append({"check": name, "ok": bool(ok), "details": details})
    return out

"""Exit criteria.  Each test records one PASS/FAIL line with its runtime,
printed in the terminal summary under "acceptance criteria"."""

import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from bernshift.catalog import builtin, random_table_measure
from bernshift.classify import dissipativity_certificate, fast_path_certificate, flip_bound_check, hopf_partial_sums
from bernshift.cli import main
from bernshift.cocycle import hellinger_affinity, kakutani_check, log_rn_shift_batch
from bernshift.examples import (
    PEAK_FLAG,
    TAYLOR_FLAG,
    dissipative_growth_report,
    factorization_batch,
    lambda_profile,
    weird_conservative_prefix,
    weird_conservativity_audit,
)
from bernshift.measure import ProductMeasure, Word, cylinder_mass, hellinger_sq, sample, sample_matrix
from bernshift.odometer import odometer_property_check, rigidity_batch
from bernshift.rules import Constant, Power
from bernshift.tail import essential_value_certificate, psi_identity_check

pytestmark = pytest.mark.acceptance


def test_c01_psi_identity(criterion):
    with criterion(1, "psi = log tau' on 6 x 10^4 configurations", 30):
        rules = {
            "a=0": ProductMeasure(Constant(0.0)),
            "a=0.5": ProductMeasure(Constant(0.5)),
            "a=1/(k+1)": ProductMeasure(Power(1.0, 1.0, shift=1.0)),
            "alternating": builtin("alternating"),
            "sinusoid": builtin("sinusoid"),
            "step-third": builtin("step-third"),
        }
        total = 0
        for i, m in enumerate(rules.values()):
            r = psi_identity_check(m, 10_000, np.random.default_rng([2024, i]))
            assert r.max_deviation <= 1e-9 + r.err_bound
            total += r.used
        assert total >= 10_000


def test_c02_odometer_property(criterion):
    with criterion(2, "odometer property for N = 1..16", 60):
        assert all(odometer_property_check(N) for N in range(1, 17))


def test_c03_rigidity(criterion):
    with criterion(3, "rigidity identity n = 1..20, 1000 points each", 60):
        m = builtin("inv-k1")
        rng = np.random.default_rng(3)
        for n in range(1, 21):
            X = sample_matrix(m, n + 48, 1000, rng)
            b = rigidity_batch(m, X, n)
            keep = ~b.overflow
            assert keep.sum() >= 999
            assert b.max_deviation <= 1e-10
            assert b.fix_ok[keep].all()
            if n <= 12:
                c = rigidity_batch(m, X, n, "carry")
                assert np.allclose(c.lhs[keep], b.lhs[keep], atol=1e-10)


def test_c04_kakutani(criterion):
    with criterion(4, "Kakutani lower bound on 100 measures, lags <= 200", 60):
        rng = np.random.default_rng(4)
        # |a| <= 0.9 caps every d_i at h(0.9, -0.9) < 1.9
        assert float(hellinger_sq(0.9, -0.9)) < 1.9
        for _ in range(100):
            m = random_table_measure(rng, 64, 0.9)
            for r in kakutani_check(m, range(1, 201), delta=0.1):
                assert r.lower_ok and r.precondition_violations == ()
        rho = hellinger_affinity(builtin("first-half"), 1).rho
        assert abs(rho - (2 + math.sqrt(3)) / 4) <= 1e-12


def test_c05_monte_carlo_rho(criterion):
    with criterion(5, "sampled E sqrt(T^n') within 3 se of rho(n)", 120):
        measures = [builtin("first-half"), builtin("const-half"), random_table_measure(np.random.default_rng(5), 32, 0.6)]
        lags = [1, 5, 20]
        for j, m in enumerate(measures):
            X = sample_matrix(m, 200, 100_000, np.random.default_rng([5, j]))
            v, _ = log_rn_shift_batch(m, X, lags)
            s = np.exp(v / 2)
            for i, n in enumerate(lags):
                rho = hellinger_affinity(m, n).rho
                se = s[:, i].std(ddof=1) / math.sqrt(s.shape[0])
                assert abs(s[:, i].mean() - rho) <= 3 * se + 1e-12


def test_c06_dissipativity(criterion):
    with criterion(6, "dissipativity certificate, geometric rho, Hopf plateau", 120):
        m = builtin("const-half")
        assert fast_path_certificate(m, 200) is not None
        r = dissipativity_certificate(m, 200)
        assert r.certified
        fit = np.polyfit(np.array(r.lags, float), np.log(r.rho), 1)
        resid = np.log(r.rho) - np.polyval(fit, np.array(r.lags, float))
        r2 = 1 - (resid**2).sum() / ((np.log(r.rho) - np.log(r.rho).mean()) ** 2).sum()
        assert r2 >= 0.99 and fit[0] < 0
        tr = hopf_partial_sums(m, 200, 1000, seed=6)
        assert tr.plateau(100, 1000)
        fair = hopf_partial_sums(builtin("fair"), 50, 1000, seed=6)
        assert np.array_equal(fair.S, np.tile(np.array(fair.checkpoints, float), (50, 1)))


def test_c07_flip_bound(criterion):
    with criterion(7, "flip bound on 1000 random trials", 30):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            m = random_table_measure(rng, 48, 0.8)
            x = sample(m, 64, rng)
            flips = rng.choice(np.arange(1, 65), size=int(rng.integers(1, 9)), replace=False)
            assert flip_bound_check(m, x, flips, int(rng.integers(1, 64))).ok


def test_c08_certificate(criterion):
    with criterion(8, "essential-value certificate for a -> 1/3", 10):
        m = builtin("step-third")
        c = essential_value_certificate(m, 1 / 3, 0.05, "01", 100_000)
        assert c.beta == pytest.approx(1 / 6, abs=1e-15)
        assert c.measured_mass_ratio >= c.beta
        assert abs(math.log((1 + c.a_nk) / (1 - c.a_nk)) - math.log(2)) < 0.05
        # mass of C with x_{n_k} = 0 by enumerating every free coordinate
        nk, free = c.n_k, c.n_k - 1 - len(c.cylinder)
        total = math.fsum(
            cylinder_mass(m, Word(c.cylinder.symbols + bits + (0,)))
            for bits in itertools.product((0, 1), repeat=free)
        )
        ratio = total / cylinder_mass(m, c.cylinder)
        exact = (1 - Fraction(c.a_nk)) / 2
        assert abs(ratio - c.measured_mass_ratio) <= 1e-15
        assert abs(Fraction(c.measured_mass_ratio) - exact) <= Fraction(1, 10**15)
        assert nk == 16


def test_c09_example_audits(criterion, tmp_path):
    with criterion(9, "dissipative and scheduled-construction audits", 300):
        for k in (1, 3, 8, 16):
            assert [lambda_profile(k, n) for n in (0, 1 << (k - 1), 1 << k)] == [1.0, 1.5, 1.0]
        for variant in ("printed", "sqrt"):
            rep = dissipative_growth_report(variant)
            assert TAYLOR_FLAG in rep["flags"]
        p1 = weird_conservative_prefix(1, seed=9)
        audit = weird_conservativity_audit(p1, samples=4000, seed=9)
        a1 = audit.rates[0]
        assert a1["rate"] >= 1 - 0.5 - 3 * a1["stderr"]
        assert PEAK_FLAG in audit.flags
        for t in (1, 2):
            fac = factorization_batch(weird_conservative_prefix(t, seed=9), 1000, seed=9)
            assert fac["points"] == 1000 and fac["failures"] == 0
        # the written reports carry both flags and are reproducible
        texts = []
        for run in ("a", "b"):
            out = tmp_path / run
            assert main(["examples", "dissipative", "--out", str(out)]) == 0
            assert main(["examples", "weird", "--tmax", "1", "--audit", "--seed", "9", "--out", str(out)]) == 0
            texts.append({p.name: p.read_text() for p in sorted(out.iterdir())})
        for name in ("audit.json", "schedule.json", "dissipative.json", "taylor.csv", "bias.csv", "audit.csv"):
            a, b = texts[0][name], texts[1][name]
            assert a.replace(str(tmp_path / "a"), "") == b.replace(str(tmp_path / "b"), "")
        assert "taylor-step" in texts[0]["dissipative.json"]
        assert json.loads(texts[0]["audit.json"])["result"]["flags"].count(PEAK_FLAG) == 1


def test_c10_determinism(criterion, tmp_path):
    with criterion(10, "selftest reports byte-identical across runs", 60):
        assert main(["selftest", "--seed", "10", "--out", str(tmp_path)]) == 0
        first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
        assert main(["selftest", "--seed", "10", "--out", str(tmp_path)]) == 0
        second = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
        assert first == second and first

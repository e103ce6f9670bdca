import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bernshift.catalog import builtin, random_table_measure
from bernshift.errors import CertificateNotFound, PreconditionError
from bernshift.measure import ProductMeasure, Word, cylinder_mass
from bernshift.rules import Constant, Interleaved
from bernshift.tail import (
    essential_value_certificate,
    holonomy_log_rn,
    limit_point_scan,
    log_odds,
    psi_identity_check,
    psi_via_lag,
    tail_cocycle_psi,
)


@pytest.mark.parametrize("name", ["fair", "const-half", "inv-k1", "alternating", "sinusoid", "step-third"])
def test_psi_identity_builtins(name):
    r = psi_identity_check(builtin(name), 2000, np.random.default_rng(0))
    assert r.ok and r.used > 1900


@settings(max_examples=25)
@given(st.integers(0, 2**31))
def test_psi_identity_random_tables(seed):
    rng = np.random.default_rng(seed)
    r = psi_identity_check(random_table_measure(rng, 30, 0.9), 200, rng)
    assert r.ok


def test_psi_identity_with_biased_past_needs_correction():
    m = ProductMeasure(Constant(0.2), past_bias=0.3)
    r = psi_identity_check(m, 500, np.random.default_rng(1))
    assert r.ok and r.past_correction != 0


def test_scalar_psi_routes_agree():
    m = builtin("inv-k1")
    x = Word.from_string("1101001011" + "0" * 30)
    assert tail_cocycle_psi(m, x).value == pytest.approx(psi_via_lag(m, x).value, abs=1e-9)


def test_certificate_step_third():
    c = essential_value_certificate(builtin("step-third"), 1 / 3, 0.05, "01", 100_000)
    assert c.beta == pytest.approx(1 / 6)
    assert c.measured_mass_ratio >= c.beta
    assert abs(c.t_nk - math.log(2)) < 0.05
    assert c.t_nk == pytest.approx(log_odds(c.a_nk))


def test_certificate_with_monte_carlo():
    c = essential_value_certificate(builtin("step-third"), 1 / 3, 0.05, "01", 100_000, mc_samples=2000, seed=3)
    assert c.mc["hit_fraction"] >= c.beta - 3 * c.mc["stderr"]


def test_certificate_not_found():
    with pytest.raises(CertificateNotFound):
        essential_value_certificate(builtin("fair"), 1 / 3, 0.05, "01", 1000)


def test_certificate_rejects_bad_p():
    with pytest.raises(PreconditionError):
        essential_value_certificate(builtin("step-third"), 1.5, 0.05, "01", 1000)


def test_limit_points():
    lp = limit_point_scan(builtin("step-third"), 20_000, 1e-3)
    vals = lp.values()
    assert lp.contains_zero
    assert any(abs(v - 1 / 3) < 2e-3 for v in vals)
    assert not limit_point_scan(builtin("const-half"), 5000).contains_zero


def test_holonomy_fixture():
    m = builtin("first-half")
    assert holonomy_log_rn(m, "0", "1").value == pytest.approx(math.log(3))
    assert holonomy_log_rn(m, "01", "10").value == pytest.approx(
        math.log(cylinder_mass(m, "10") / cylinder_mass(m, "01"))
    )

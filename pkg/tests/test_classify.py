import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bernshift.catalog import builtin, random_table_measure
from bernshift.classify import (
    Budgets,
    checkpoints,
    dissipativity_certificate,
    fast_path_certificate,
    flip_bound_check,
    growth_fit,
    hopf_partial_sums,
    krieger_type_report,
    prefix_measure,
)
from bernshift.errors import PreconditionError
from bernshift.measure import Word, sample


def test_checkpoints():
    assert checkpoints(1000) == [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000]
    assert checkpoints(30)[-1] == 30


def test_fast_path_const_half():
    f = fast_path_certificate(builtin("const-half"), 200)
    assert f is not None and f["N"] == 1 and f["epsilon"] == 0.5
    assert fast_path_certificate(builtin("inv-k1"), 200) is None


def test_dissipativity_const_half_geometric():
    r = dissipativity_certificate(builtin("const-half"), 200)
    assert r.certified
    assert r.growth_fit.regime == "geometric" and r.growth_fit.r2_n >= 0.99


def test_dissipativity_needs_range():
    with pytest.raises(PreconditionError):
        dissipativity_certificate(builtin("fair"), 5)


def test_growth_fit_regimes():
    n = np.arange(1, 101, dtype=float)
    assert growth_fit(n, 0.3 * n).regime == "geometric"
    assert growth_fit(n, np.log(n)).regime == "polynomial"
    assert growth_fit(n, np.zeros_like(n)).regime == "flat"


def test_hopf_fair_is_exact():
    tr = hopf_partial_sums(builtin("fair"), 10, 500, seed=0)
    assert np.array_equal(tr.S, np.tile(np.array(tr.checkpoints, dtype=float), (10, 1)))


def test_hopf_const_half_plateaus():
    tr = hopf_partial_sums(builtin("const-half"), 100, 1000, seed=1)
    assert tr.plateau(100, 1000)
    assert tr.to_csv().splitlines()[0] == "sample_id,N,S_N"


def test_hopf_is_seeded():
    a = hopf_partial_sums(builtin("const-half"), 40, 50, seed=5)
    b = hopf_partial_sums(builtin("const-half"), 40, 50, seed=5)
    assert np.array_equal(a.S, b.S)


def test_prefix_measure():
    m = prefix_measure(builtin("inv-k1"), 10)
    assert m.bias(np.array([10]))[0] == pytest.approx(1 / 11)
    assert m.bias(np.array([11]))[0] == 0.0


@settings(max_examples=80)
@given(st.integers(0, 2**31), st.integers(1, 6), st.integers(1, 40))
def test_flip_bound(seed, nflips, n):
    rng = np.random.default_rng(seed)
    m = random_table_measure(rng, 50, 0.8)
    x = sample(m, 60, rng)
    flips = rng.choice(np.arange(1, 61), size=nflips, replace=False)
    assert flip_bound_check(m, x, flips, n).ok


def test_flip_delta_is_derivative_difference():
    from bernshift.cocycle import log_rn_shift

    m = prefix_measure(builtin("sinusoid"), 40)
    x = Word.from_string("0110100111010" + "0" * 50)
    w = list(x.symbols)
    for k in (2, 5):
        w[k - 1] ^= 1
    n = 3
    r = flip_bound_check(m, x, [2, 5], n)
    direct = log_rn_shift(m, Word(w), n).value - log_rn_shift(m, x, n).value
    assert r.delta == pytest.approx(direct, abs=1e-10)


def test_budgets_validation():
    with pytest.raises(PreconditionError):
        Budgets(nmax=0)


@pytest.mark.parametrize(
    "name,guess",
    [("first-half", "II1"), ("inv-k1", "II1"), ("const-half", "dissipative")],
)
def test_krieger_guesses(name, guess):
    b = Budgets(kmax=1 << 14, nmax=50, hopf_samples=50, hopf_N=200, scan_max=5000)
    r = krieger_type_report(builtin(name), b)
    assert r.type_guess == guess
    assert r.rationale

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bernshift.catalog import builtin, random_table_measure
from bernshift.cocycle import (
    hellinger_affinity,
    hellinger_curve,
    hellinger_distance,
    kakutani_check,
    kakutani_upper_constant,
    log_rn_shift,
    log_rn_shift_batch,
)
from bernshift.errors import HorizonTooShort, PreconditionError
from bernshift.measure import Word, marginal, sample_matrix

from conftest import bias_tables

AFFINITY = (2 + math.sqrt(3)) / 4


def test_first_half_fixtures(first_half):
    assert log_rn_shift(first_half, Word.from_string("01"), 1).value == pytest.approx(math.log(3), abs=1e-14)
    assert log_rn_shift(first_half, Word.from_string("00"), 1).value == pytest.approx(0.0, abs=1e-14)
    assert hellinger_affinity(first_half, 1).rho == pytest.approx(AFFINITY, abs=1e-12)


def test_fair_is_invariant():
    m = builtin("fair")
    for n in (1, 7, 100):
        assert hellinger_affinity(m, n).rho == 1.0
        assert hellinger_distance(m, n)[0] == 0.0


@given(bias_tables(max_len=12), st.text("01", min_size=16, max_size=16), st.integers(1, 3))
def test_derivative_is_explicit_ratio(m, s, n):
    # past the table and the lag every factor is 1, so a 16-coordinate word fixes the value
    x = Word.from_string(s)
    want = math.fsum(
        math.log(marginal(m, k - n)[c]) - math.log(marginal(m, k)[c]) for k, c in enumerate(x.symbols, start=1)
    )
    assert log_rn_shift(m, x, n).value == pytest.approx(want, abs=1e-12)


@given(bias_tables(), st.integers(0, 2**31))
def test_batch_matches_scalar(m, seed):
    rng = np.random.default_rng(seed)
    X = sample_matrix(m, 80, 5, rng)
    vals, errs = log_rn_shift_batch(m, X, [1, 2, 9])
    for i in range(5):
        for j, n in enumerate([1, 2, 9]):
            assert vals[i, j] == pytest.approx(log_rn_shift(m, Word.from_array(X[i]), n).value, abs=1e-9)


def test_batch_horizon_guard():
    with pytest.raises(HorizonTooShort):
        log_rn_shift_batch(builtin("fair"), np.zeros((2, 3), dtype=np.uint8), [5])
    with pytest.raises(PreconditionError):
        hellinger_affinity(builtin("fair"), 0)


def test_mean_of_derivative_is_one():
    # T^n' integrates to 1 under mu
    m = builtin("const-half")
    X = sample_matrix(m, 64, 200_000, np.random.default_rng(3))
    v, _ = log_rn_shift_batch(m, X, [1, 3])
    assert np.allclose(np.exp(v).mean(axis=0), 1.0, atol=0.02)


@given(st.integers(0, 2**31))
def test_kakutani_lower_on_random_tables(seed):
    m = random_table_measure(np.random.default_rng(seed), 24, 0.9)
    for r in kakutani_check(m, range(1, 30)):
        assert r.lower_ok
        if r.upper_ok is not None:
            assert r.upper_ok


def test_kakutani_constant_monotone():
    assert kakutani_upper_constant(0.1) > kakutani_upper_constant(1.0) > 0


def test_curve_csv_header(first_half):
    c = hellinger_curve(first_half, [1, 2, 3])
    assert c.to_csv().splitlines()[0] == "n,rho,d,neg_log_rho,err_bound"
    assert c.lags() == [1, 2, 3]


def test_slow_tail_has_finite_error_bound():
    p = hellinger_affinity(builtin("inv-k1"), 4, strict=False)
    assert 0 < p.rho < 1 and math.isfinite(p.err_bound)

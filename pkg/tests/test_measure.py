import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bernshift.catalog import builtin, builtin_names, resolve
from bernshift.errors import InvalidRule, PreconditionError
from bernshift.measure import (
    ProductMeasure,
    Word,
    acip_report,
    cylinder_mass,
    log_cylinder_mass,
    marginal,
    measure_from_dict,
    measure_to_dict,
    nonsingularity_report,
    sample_matrix,
)
from bernshift.rules import Constant, Power, Table

from conftest import bias_tables


def test_word_roundtrip_and_shift():
    w = Word.from_string("0110")
    assert str(w) == "0110" and w.horizon == 4
    assert str(w.shifted(1)) == "110"
    with pytest.raises(PreconditionError):
        Word((0, -1))


def test_fixture_marginals():
    assert marginal(builtin("fair"), 5).tolist() == [0.5, 0.5]
    assert marginal(builtin("const-half"), 3).tolist() == [0.25, 0.75]
    # the past is always fair for the catalogue rules
    assert marginal(builtin("inv-k"), -7).tolist() == [0.5, 0.5]


def test_cylinder_masses():
    assert cylinder_mass(builtin("fair"), "0110") == 1 / 16
    assert cylinder_mass(builtin("first-half"), "00") == 1 / 8


@given(bias_tables(), st.text("01", min_size=1, max_size=30))
def test_log_cylinder_matches_product(m, s):
    w = Word.from_string(s)
    direct = np.prod([marginal(m, k + 1)[c] for k, c in enumerate(w.symbols)])
    assert math.isclose(cylinder_mass(m, w), direct, rel_tol=1e-12)
    assert math.isclose(log_cylinder_mass(m, w), math.log(direct), rel_tol=1e-12, abs_tol=1e-12)


@given(bias_tables(), st.integers(0, 20))
def test_shifted_measure_sees_later_marginals(m, n):
    ks = np.arange(1, 10)
    assert np.array_equal(m.shifted(n).bias(ks), m.bias(ks + n))


@given(bias_tables())
def test_negation_swaps_symbols(m):
    ks = np.arange(1, 40)
    neg = m.negated()
    assert np.allclose(neg.p0(ks), m.p1(ks))


def test_invalid_rules_rejected():
    with pytest.raises(InvalidRule):
        ProductMeasure(Constant(0.0), past_bias=1.0)
    with pytest.raises(InvalidRule):
        Constant(1.0).validate()
    with pytest.raises(InvalidRule):
        resolve("no-such-measure")


@pytest.mark.parametrize("name", [n for n in builtin_names()])
def test_serialisation_roundtrip(name):
    m = builtin(name)
    back = measure_from_dict(measure_to_dict(m))
    assert measure_to_dict(back) == measure_to_dict(m)
    if m.is_binary:
        ks = np.arange(1, 200)
        assert np.array_equal(back.bias(ks), m.bias(ks))


def test_sampling_frequencies():
    m = ProductMeasure(Table(np.array([0.5, -0.5, 0.0]), 0.2))
    X = sample_matrix(m, 4, 40_000, np.random.default_rng(1))
    freq = X.mean(axis=0)
    assert np.allclose(freq, m.p1(np.arange(1, 5)), atol=0.01)


def test_sampling_is_seed_deterministic():
    m = builtin("inv-k1")
    a = sample_matrix(m, 50, 100, np.random.default_rng(7))
    b = sample_matrix(m, 50, 100, np.random.default_rng(7))
    assert np.array_equal(a, b)


def test_series_reports():
    assert acip_report(builtin("inv-k1"), 1 << 12).verdict == "converging"
    assert acip_report(builtin("inv-sqrt"), 1 << 12).verdict != "converging"
    assert nonsingularity_report(builtin("fair"), 1 << 10).verdict == "converging"
    assert acip_report(ProductMeasure(Power(1.0, 1.0, shift=1.0)), 1 << 10).partial_sum < 1


def test_prefix_frequencies_chi_square():
    from scipy.stats import chisquare

    m = builtin("inv-k1")
    X = sample_matrix(m, 3, 20_000, np.random.default_rng(11))
    codes = X[:, 0] * 4 + X[:, 1] * 2 + X[:, 2]
    observed = np.bincount(codes, minlength=8)
    expected = [cylinder_mass(m, f"{v:03b}") * X.shape[0] for v in range(8)]
    assert chisquare(observed, expected).pvalue > 1e-3

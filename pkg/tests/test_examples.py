import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bernshift.errors import BudgetExhausted, PreconditionError, RegimeViolation, StageInfeasible
from bernshift.examples import (
    PEAK_FLAG,
    PRINTED_PEAK,
    STATED_PEAK,
    TAYLOR_FLAG,
    choose_k,
    derivative_factorization_check,
    dissipative_growth_report,
    factorization_batch,
    lambda_profile,
    peak_report,
    profile_bias,
    small_derivative_probe,
    symbolic_lower_bound_terms,
    symbolic_schedule,
    taylor_table,
    terms_grow,
    weird_conservative_prefix,
    weird_conservativity_audit,
    weird_from_ks,
)
from bernshift.measure import Word


@pytest.fixture(scope="module")
def prefix1():
    return weird_conservative_prefix(1, samples=1000, seed=0)


@pytest.fixture(scope="module")
def prefix2():
    return weird_conservative_prefix(2, samples=1000, seed=0)


@pytest.mark.parametrize("k", [1, 2, 5, 12])
def test_lambda_fixtures(k):
    assert lambda_profile(k, 0) == 1.0
    assert lambda_profile(k, 1 << (k - 1)) == 1.5
    assert lambda_profile(k, 1 << k) == 1.0
    assert lambda_profile(k, (1 << k) + 3) == 1.0


@given(st.integers(1, 16), st.data())
def test_lambda_symmetric(k, data):
    n = data.draw(st.integers(0, 1 << k))
    assert lambda_profile(k, n) == lambda_profile(k, (1 << k) - n)
    assert 1.0 <= lambda_profile(k, n) <= 1.5


def test_lambda_rejects_floats():
    with pytest.raises(PreconditionError):
        lambda_profile(3, 1.5)


def test_peaks():
    assert profile_bias(4).max() * 0 + (1 + profile_bias(4).max()) / 2 == pytest.approx(3 / 5)
    assert (1 + profile_bias(4, STATED_PEAK).max()) / 2 == pytest.approx(3 / 4)
    assert peak_report()["peak_p1"] == pytest.approx(0.6)
    assert peak_report()["flag"] == PEAK_FLAG


def test_taylor_is_second_order():
    for row in taylor_table():
        assert row["ratio_to_second_order"] == pytest.approx(1.0, rel=1e-3 + 10 / row["k"])
        assert row["ratio_to_claimed"] < 0.5


@pytest.mark.parametrize("variant", ["printed", "sqrt"])
def test_dissipative_report_flags(variant):
    r = dissipative_growth_report(variant, nmax=500, kmax=1 << 14)
    assert TAYLOR_FLAG in r["flags"]
    assert r["observed_growth"]["regime"] in {"geometric", "polynomial", "flat"}
    if variant == "printed":
        assert any(f.startswith("square-summable") for f in r["flags"])


def test_probe_regime_guard():
    with pytest.raises(RegimeViolation):
        small_derivative_probe(3, 4, 1)
    r = small_derivative_probe(3, 4, 1, strict=False, samples=200)
    assert not r.regime_ok


def test_probe_is_seeded():
    a = small_derivative_probe(6, 8, 2, samples=500, seed=4)
    b = small_derivative_probe(6, 8, 2, samples=500, seed=4)
    assert a.estimate == b.estimate


def test_probe_m_zero_trivial():
    r = small_derivative_probe(2, 0, 1)
    assert r.estimate == 1.0 and r.passes


@pytest.mark.parametrize("m,t,k", [(0, 1, 1), (4, 1, 4), (2, 2, 3)])
def test_choose_k_small(m, t, k):
    assert choose_k(m, t).k == k


def test_choose_k_budget():
    with pytest.raises(BudgetExhausted):
        choose_k(64, 3, budget=1e6)


@pytest.mark.slow
def test_choose_k_monotone_grid():
    grid = {(m, t): choose_k(m, t, samples=1000).k for m in (4, 8, 16) for t in (2, 3)}
    for m in (4, 8, 16):
        assert grid[(m, 2)] <= grid[(m, 3)]
    for t in (2, 3):
        assert grid[(4, t)] <= grid[(8, t)] <= grid[(16, t)]


def test_schedule_stage_one(prefix1):
    s = prefix1.schedule.stages[0]
    assert (s.k_t, s.n_t, s.m_t) == (1, 2, 6)
    assert any("index-repair" in f for f in prefix1.schedule.flags)


def test_schedule_stage_two(prefix2):
    s = prefix2.schedule.stages[1]
    assert s.n_t == prefix2.schedule.stages[0].m_t + (1 << s.k_t)
    assert s.capped


def test_stage_three_infeasible():
    with pytest.raises(StageInfeasible):
        weird_conservative_prefix(3, samples=500)
    with pytest.raises(StageInfeasible):
        weird_conservative_prefix(4)


def test_weird_from_ks_blocks():
    p = weird_from_ks([1, 2])
    sched = p.schedule
    assert [(s.n_t, s.m_t) for s in sched.stages] == [(2, 6), (10, 1034)]
    assert p.measure.bias(np.array([1]))[0] == pytest.approx((1.5 - 1) / 2.5)
    # gap between blocks is fair
    assert p.measure.bias(np.array([4]))[0] == 0.0


def test_factorization_exact(prefix2):
    r = factorization_batch(prefix2, 300, seed=1)
    assert r["ok"] and r["max_deviation"] <= 1e-9


def test_factorization_single_point(prefix1):
    x = Word((1,) * 3 + (0,) * 40)
    r = derivative_factorization_check(prefix1, 3, x)
    assert r.ok


def test_audit_stage_one(prefix1):
    a = weird_conservativity_audit(prefix1, samples=2000)
    r = a.rates[0]
    assert r["ok"] and r["rate"] >= 0.5 - 3 * r["stderr"]
    assert a.rates_csv().splitlines()[0] == "t,lags,rate,stderr,target,ok,rate_literal,stderr_literal"
    assert PEAK_FLAG in a.flags


def test_symbolic_schedule_terms_grow():
    st_ = symbolic_schedule(3, samples=500)
    assert [s.t for s in st_] == [1, 2, 3]
    assert st_[2].k_source == "regime-lower-bound"
    assert terms_grow(symbolic_lower_bound_terms(st_))


@pytest.mark.slow
def test_choose_k_m64():
    # the default budget stops short; a larger one finds k = 17 with 1000 samples
    with pytest.raises(BudgetExhausted):
        choose_k(64, 3, samples=1000)
    r = choose_k(64, 3, samples=1000, budget=5e10)
    est = [e for _, e, _ in r.tried]
    assert r.k == 17 and est == sorted(est)

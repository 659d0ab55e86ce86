import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holderpsh.errors import InvalidSchedule, NoFeasibleLambda, OverflowHorizon
from holderpsh.logscale import LogScale
from holderpsh.schedule import (
    build_global_schedule,
    build_local_schedule,
    int_text,
    parse_int_text,
    slack_inequality,
    smallest_k,
    verify_crossing_global,
    verify_crossing_local,
)

T1 = LogScale.from_t(0.1)


def _direct_local_margin(gamma, eps0, lam, s1, n):
    """Crossing margin at d = t_n from the defining expressions, in 60-digit arithmetic."""
    with mpmath.workdps(60):
        s_n = (2 * mpmath.mpf(gamma)) ** (n - 1) * s1
        t_n = mpmath.exp(-s_n)
        t_n1 = t_n ** (2 * mpmath.mpf(gamma))
        upper = (-1 + mpmath.log(t_n + t_n1) / mpmath.log(t_n1)) / mpmath.mpf(lam) ** (n + 1)
        lower = (-(1 + mpmath.mpf(eps0)) + mpmath.log(2 * t_n) / mpmath.log(t_n**gamma)) / mpmath.mpf(lam) ** n
        return float(lower - upper)


# --- k selection ----------------------------------------------------------


def test_smallest_k_small_threshold():
    k = smallest_k(25 / 3)
    assert k == 4161
    assert math.log(k - 1) <= 25 / 3 < math.log(k)


@given(st.floats(0.7, 60.0))
def test_smallest_k_is_minimal(th):
    k = smallest_k(th)
    with mpmath.workdps(60):
        assert mpmath.log(k) > th
        assert k == 2 or mpmath.log(k - 1) <= th


def test_smallest_k_large_threshold_is_exact():
    th = 5000.5
    k = smallest_k(th)
    with mpmath.workdps(2200):
        assert mpmath.log(k) > th >= mpmath.log(k - 1)


def test_smallest_k_refuses_absurd_threshold():
    with pytest.raises(OverflowHorizon):
        smallest_k(1e8)


@given(st.integers(min_value=0, max_value=2**40000))
def test_int_text_round_trip(k):
    assert parse_int_text(int_text(k)) == k


# --- local schedule -------------------------------------------------------


def test_local_schedule_half_space_values():
    sch = build_local_schedule(1.05, T1, 50)
    assert sch.eps0 == pytest.approx(1 / 4.2)
    assert sch.n_start == 2
    assert sch.lam == pytest.approx(1.24145, abs=1e-5)
    assert sch.tau_prime == pytest.approx(math.log(sch.lam) / math.log(2.1))


def test_local_schedule_matches_direct_margins():
    gamma = 1.05
    sch = build_local_schedule(gamma, T1, 50)
    ns = range(sch.n_start, 8)
    assert all(_direct_local_margin(gamma, sch.eps0, sch.lam, T1.s, n) > 0 for n in ns)
    # one grid step above the chosen lambda breaks the crossing somewhere
    step = (2 * gamma - 1) / 4000
    worse = sch.lam + step
    direct = [_direct_local_margin(gamma, sch.eps0, worse, T1.s, n) for n in range(sch.n_start, 51)]
    assert min(direct) <= 0
    rep = verify_crossing_local(sch, lam=worse)
    assert not rep.passed


def test_local_n_start_is_least():
    sch = build_local_schedule(2.01, T1, 50)
    assert slack_inequality(2.01, sch.eps0, T1.s, sch.n_start) > 0
    if sch.n_start > 1:
        assert slack_inequality(2.01, sch.eps0, T1.s, sch.n_start - 1) <= 0


@given(st.floats(1.01, 3.0))
def test_local_crossing_holds_for_built_schedules(gamma):
    sch = build_local_schedule(gamma, T1, 50)
    assert sch.lam > 1
    rep = verify_crossing_local(sch)
    assert rep.passed and rep.min_margin > 0


@given(st.floats(2.5, 1e6))
def test_local_shell_index_brackets(D):
    sch = build_local_schedule(1.05, T1, 50)
    n = int(sch.shell_index(D))
    assert sch.s_prime(n) < D <= sch.s_prime(n + 1) * (1 + 1e-12)


def test_local_schedule_rejects_gamma_at_most_one():
    with pytest.raises(InvalidSchedule):
        build_local_schedule(1.0, T1)


def test_local_schedule_empty_grid_raises():
    with pytest.raises(NoFeasibleLambda):
        build_local_schedule(1.05, T1, lam_grid=np.array([1.9, 2.0]))


# --- global schedule ------------------------------------------------------


def _half_space_global():
    return build_global_schedule(1.05, 0.2915, 2.238, 0.1, T1, n_max=50, n_big_limit=49)


def test_global_schedule_k_and_crossing():
    sch = _half_space_global()
    threshold = (0.1 + 2.238) / 0.2915
    assert math.log(sch.k_min) > threshold >= math.log(sch.k_min - 1)
    assert sch.k == 2 * sch.k_min
    assert sch.tau == pytest.approx(math.log(sch.lam_prime) / math.log(sch.k))
    rep = verify_crossing_global(sch)
    assert rep.passed and rep.n_first <= sch.n_big


def test_global_tampered_lambda_prime_fails():
    sch = _half_space_global()
    rep = verify_crossing_global(sch, lam_prime=sch.lam_prime * 1.5)
    assert not rep.passed


def test_global_t2_matches_direct_evaluation():
    sch = _half_space_global()
    with mpmath.workdps(80):
        for n in (1, 2):
            s_n = mpmath.mpf(sch.k) ** (n - 1) * sch.t1.s
            t_n = mpmath.exp(-s_n)
            t2 = t_n ** (mpmath.mpf(1) / sch.k) - t_n**sch.gamma
            assert float(sch.neg_log_t2(n)) == pytest.approx(float(-mpmath.log(t2)), rel=1e-12)


@given(st.floats(1.0, 1e200))
def test_global_shell_index_brackets(D):
    sch = _half_space_global()
    n = int(sch.shell_index(D)[0])
    if D > sch.neg_log_t2(sch.n_max + 1):
        # deeper than the last built shell
        assert n == sch.n_max + 1
        return
    if n == 0:
        assert D <= sch.neg_log_t2(1)
    else:
        assert sch.neg_log_t2(n) < D <= sch.neg_log_t2(n + 1)


def test_global_explicit_k_must_exceed_threshold():
    with pytest.raises(InvalidSchedule):
        build_global_schedule(1.05, 0.2915, 2.238, 0.1, T1, k=10)


def test_global_infeasible_for_huge_constant():
    # a large C4 relative to tau_j0 pushes every first good shell past the limit
    with pytest.raises(NoFeasibleLambda):
        build_global_schedule(1.19, 0.227, 11952.7, 0.1, T1, n_max=50, n_big_limit=49)


@pytest.mark.parametrize("kw", [{"tau0": 0.0}, {"C4": -1.0}, {"eps1": 0.0}])
def test_global_argument_guards(kw):
    args = {"gamma": 1.05, "tau0": 0.29, "C4": 2.0, "eps1": 0.1, "t1": T1}
    args.update(kw)
    with pytest.raises(InvalidSchedule):
        build_global_schedule(**args)

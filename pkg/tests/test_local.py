import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holderpsh.errors import EmptySample, OutsideCollar
from holderpsh.fixtures import half_space, holder_cusp, lipschitz_wedge
from holderpsh.geometry import points_at_depth
from holderpsh.local import (
    LocalExhaustion,
    RenormalizedLocal,
    compose_power,
    derive_C3,
    fit_local_bounds,
    log_separation,
    power_fit,
)
from holderpsh.logscale import LOG2, LogScale, log1mexp
from holderpsh.schedule import build_local_schedule

T1 = LogScale.from_t(0.1)


@pytest.fixture(scope="module")
def half_ex():
    c = half_space().charts[0]
    return LocalExhaustion(c, build_local_schedule(1.05, T1, 50))


@pytest.fixture(scope="module")
def cusp_ex():
    c = holder_cusp().charts[0]
    return LocalExhaustion(c, build_local_schedule(2.01, T1, 50))


def _below_origin(depth):
    return -1j * np.asarray(depth, dtype=float)


# --- extended range helpers ----------------------------------------------


@given(st.floats(1e-12, 700.0))
def test_log1mexp_matches_direct(x):
    with mpmath.workdps(50):
        direct = float(mpmath.log1p(-mpmath.exp(-x)))
    assert log1mexp(x) == pytest.approx(direct, rel=1e-13, abs=1e-300)


def test_logscale_power_and_underflow():
    t = LogScale.from_t(0.1)
    assert t.power(2.0).t == pytest.approx(0.01)
    assert LogScale(800.0).underflows
    with pytest.raises(ValueError):
        LogScale.from_t(1.5)
    assert LOG2 == pytest.approx(math.log(2))


# --- separations in log form ---------------------------------------------


def test_log_separation_sources():
    assert log_separation(half_space().charts[0], 5.0, 1.05) == (5.0, "exact")
    s, src = log_separation(lipschitz_wedge().charts[0], 5.0, 1.05)
    assert src == "exact" and s == pytest.approx(5.0 + 0.5 * math.log(1.25))
    c = holder_cusp().charts[0]
    s, src = log_separation(c, -math.log(1e-2), 2.01)
    assert src == "numeric" and 2 * -math.log(1e-2) < s < 2.01 * -math.log(1e-2)
    s, src = log_separation(c, 100.0, 2.01)
    assert src == "floor" and s == pytest.approx(201.0)


# --- v_n and v ------------------------------------------------------------


def test_vn_half_space_closed_form(half_ex):
    # flat graph: d_t = d + t and C_t = t, so v_n = (-log(d + t_n)/s_n - 1 - eps0) / lambda**n
    sch = half_ex.schedule
    depth = np.array([0.3, 0.05, 1e-3])
    for n in (1, 2, 3):
        s_n = float(sch.s(n))
        expected = (-np.log(depth + math.exp(-s_n)) / s_n - 1 - sch.eps0) / sch.lam**n
        got = half_ex.eval_v_n(n, _below_origin(depth)).value
        assert np.allclose(got, expected, rtol=1e-12)


def test_vn_bracket_contains_value_after_underflow(half_ex):
    vv = half_ex.eval_v_n(9, _below_origin([1e-3, 1e-9]))
    assert vv.underflow
    assert np.all(vv.lo <= vv.value + 1e-15) and np.all(vv.value <= vv.hi + 1e-15)


@given(st.floats(1e-12, 0.09))
def test_v_shell_sandwich(depth):
    c = half_space().charts[0]
    ex = LocalExhaustion(c, build_local_schedule(1.05, T1, 50))
    v, d, n = ex.eval_v(_below_origin([depth]), return_parts=True)
    sch = ex.schedule
    w = sch.lam ** -float(n[0])
    assert -(1 + sch.eps0) * w - 1e-15 <= v[0] <= -sch.eps0 * w + 1e-15


@given(st.floats(1e-12, 0.05), st.floats(1.01, 50.0))
def test_v_decreases_with_depth(depth, factor):
    c = half_space().charts[0]
    ex = LocalExhaustion(c, build_local_schedule(1.05, T1, 50))
    deep, shallow = ex.eval_v(_below_origin([min(depth * factor, 0.05), depth]))
    assert deep <= shallow + 1e-15
    assert shallow < 0


def test_crossing_at_shell_interfaces(cusp_ex):
    sch = cusp_ex.schedule
    c = cusp_ex.chart
    for n in range(sch.n_start, sch.n_start + 2):
        d = math.exp(-float(sch.s_prime(n + 1)))
        if d < 1e-12:
            break
        z = points_at_depth(c, 0.0, np.linspace(-0.1, 0.1, 20), np.full(20, d))
        assert np.all(cusp_ex.crossing_at(n, z) > 0)


def test_v_outside_collar_needs_extension(half_ex):
    z = _below_origin([0.5])
    with pytest.raises(OutsideCollar):
        half_ex.eval_v(z)
    v = half_ex.eval_v(z, extend=True)
    sch = half_ex.schedule
    w = sch.lam ** -sch.n_start
    assert -(1 + sch.eps0) * w <= v[0] <= -sch.eps0 * w


def test_kappa_range():
    with pytest.raises(ValueError):
        LocalExhaustion(half_space().charts[0], build_local_schedule(1.05, T1, 50), kappa=0.0)


# --- growth fit -----------------------------------------------------------


def test_local_growth_ratio_within_bound(half_ex):
    depth = np.logspace(-2, -8, 200)
    fit = fit_local_bounds(half_ex, _below_origin(depth))
    sch = half_ex.schedule
    bound = sch.lam * (2 * sch.gamma) ** sch.tau_prime * (1 + sch.eps0) / sch.eps0
    assert fit.ratio_bound == pytest.approx(bound)
    assert fit.passed
    assert half_ex.C1 <= fit.C1 and fit.C2 <= half_ex.C2


def test_power_fit_needs_samples():
    with pytest.raises(EmptySample):
        power_fit([], [], 0.5)


@given(st.lists(st.floats(-10.0, -1e-6), min_size=1, max_size=20), st.floats(0.05, 1.0))
def test_compose_power_stays_negative_and_monotone(vals, p):
    v = np.sort(np.array(vals))
    out = compose_power(v, p)
    assert np.all(out < 0)
    assert np.all(np.diff(out) >= -1e-12)


# --- renormalised family --------------------------------------------------


def test_renormalised_exponents():
    dom = holder_cusp()
    ren = RenormalizedLocal(dom, {0: build_local_schedule(2.01, T1, 50)})
    assert ren.tau0 == ren.taus[0]
    assert ren.exponent(0) == pytest.approx(1.0)
    ex = ren.exhaustion(0)
    assert ren.C == pytest.approx(ex.C2 / ex.C1)
    w = ren.eval_w_tj(0, 0.0, _below_origin([1e-3, 1e-6]))
    assert np.all(w < 0)


def test_derive_C3_bounds_samples(rng):
    dom = holder_cusp()
    ren = RenormalizedLocal(dom, {0: build_local_schedule(2.01, T1, 50)})
    c = dom.charts[0]
    xs = rng.uniform(-0.2, 0.2, 60)
    depth = np.exp(rng.uniform(math.log(1e-8), math.log(1e-3), 60))
    z = c.to_ambient(points_at_depth(c, 0.0, xs, depth))
    res = derive_C3(dom, ren, (1e-2, 1e-3), z, 2.01)
    assert res.bound_violations == 0
    assert res.C3 >= res.max_diff
    assert res.min_diff >= -1e-9

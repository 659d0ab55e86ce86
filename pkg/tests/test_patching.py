import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holderpsh.errors import EmptySample, OutsideCollar
from holderpsh.patching import (
    HESSIAN_SAFETY,
    SMOOTHSTEP_D1_MAX,
    SMOOTHSTEP_D2_MAX,
    build_global,
    check_richberg,
    constant_C5,
    fit_final_bounds,
    residual_comparison,
    sample_collar,
    smoothstep,
)
from holderpsh.pipeline import rng_for, sweep_points

SMOOTHSTEP_POLY = np.poly1d([6.0, -15.0, 10.0, 0.0, 0.0, 0.0])


def _laplacian(f, z, h=1e-4):
    return (f(z + h) + f(z - h) + f(z + 1j * h) + f(z - 1j * h) - 4 * f(z)) / h**2


# --- cutoffs --------------------------------------------------------------


def test_smoothstep_derivative_maxima():
    u = np.linspace(0, 1, 200001)
    assert np.max(np.abs(SMOOTHSTEP_POLY.deriv(1)(u))) == pytest.approx(SMOOTHSTEP_D1_MAX, rel=1e-9)
    assert np.max(np.abs(SMOOTHSTEP_POLY.deriv(2)(u))) == pytest.approx(SMOOTHSTEP_D2_MAX, rel=1e-9)


@given(st.floats(-1.0, 2.0))
def test_smoothstep_clamps_and_matches_polynomial(u):
    s = float(smoothstep(u))
    assert 0.0 <= s <= 1.0
    if 0 <= u <= 1:
        assert s == pytest.approx(SMOOTHSTEP_POLY(u), abs=1e-14)
    else:
        assert s == (0.0 if u < 0 else 1.0)


def test_cutoff_plateau_and_support(half_build):
    cut = half_build.family.cutoffs.cutoffs[0]
    c = cut.chart
    rho, r2 = c.inner_radius, c.middle
    inner = c.to_ambient(0.9 * rho * np.exp(1j * np.linspace(0, 6, 7)))
    outer = c.to_ambient(0.999 * r2 * np.exp(1j * np.linspace(0, 6, 7)))
    assert np.allclose(cut(inner), cut.height)
    assert np.allclose(cut(outer), 0.0)


@pytest.mark.parametrize("name", ["half_build", "cusp_build"])
def test_bumps_absorbed_by_quadratic(name, request, rng):
    fam = request.getfixturevalue(name).family
    M = fam.M
    for cut in fam.cutoffs.cutoffs:
        c = cut.chart
        zeta = c.middle * np.sqrt(rng.uniform(0, 1, 400)) * np.exp(2j * np.pi * rng.uniform(0, 1, 400))
        z = c.to_ambient(zeta)
        # -Laplacian/4 of the bump stays under its bound, and eta + M|z|^2 is subharmonic
        lap = _laplacian(cut, z)
        assert np.all(-lap / 4 <= cut.laplacian_bound * (1 + 1e-3))
        total = _laplacian(lambda p: cut(p) + M * np.abs(p) ** 2, z)
        assert np.all(total >= 0)
    assert M == pytest.approx(HESSIAN_SAFETY * max(c.laplacian_bound for c in fam.cutoffs.cutoffs))


# --- patched family -------------------------------------------------------


@pytest.mark.parametrize("name", ["half_build", "cusp_build"])
def test_richberg_bounds_hold(name, request):
    b = request.getfixturevalue(name)
    z = sample_collar(b.domain, 100, rng_for(7, 0), 1e-8, b.family.collar_width / 2)
    for t in (1e-2, 1e-3):
        r = check_richberg(b.family, b.glob.C4, b.gamma, t, z)
        assert r.failures == 0


@pytest.mark.parametrize("name", ["half_build", "cusp_build"])
def test_analytic_constant_dominates_sampled(name, request):
    glob = request.getfixturevalue(name).glob
    assert glob.C4 >= glob.C4_fit


def test_eval_w_t_outside_every_chart(half_build):
    with pytest.raises(OutsideCollar):
        half_build.family.eval_w_t(0.0, np.array([-5j]))
    assert not half_build.family.covered(np.array([-5j]))[0]


def test_sample_collar_depth_range(half_build):
    z = sample_collar(half_build.domain, 50, rng_for(3, 0), 1e-6, 1e-3)
    d = -z.imag  # flat graph through 0: depth is -Im z
    assert np.all((d >= 1e-6 * (1 - 1e-9)) & (d < 1e-3))


def test_sample_collar_impossible_range(half_build):
    with pytest.raises(EmptySample):
        sample_collar(half_build.domain, 5, rng_for(3, 0), 50.0, 60.0, max_rounds=2)


# --- global exhaustion ----------------------------------------------------


def test_global_w_trend_on_sweep(half_build):
    ex = half_build.exhaustion
    z = sweep_points(half_build.domain, 60)
    w, d, _ = ex.eval_w(z, return_parts=True)
    assert np.all(w < 0)
    assert np.all(np.diff(d) < 0)
    # deeper points never sit above shallower ones
    assert np.all(np.diff(w) >= -1e-12)


def test_global_floor_below_first_shell(half_build):
    ex = half_build.exhaustion
    z = sample_collar(half_build.domain, 50, rng_for(5, 0), 1e-8, 1e-2)
    assert np.all(ex.w_n(ex.schedule.n_big, z) >= ex.floor)
    assert constant_C5(ex, z) > 0


def test_build_global_records_schedule_failure(half_build):
    b = half_build
    gb = build_global(b.domain, b.ren, b.C3, b.gamma, rng_for(0, 2), n_max=3, calibration_samples=20)
    assert gb.exhaustion is None
    assert gb.error.startswith("NoFeasibleLambda")


# --- final sandwich fits --------------------------------------------------


@given(
    st.lists(st.tuples(st.floats(-5.0, -1e-6), st.floats(1e-12, 0.3)), min_size=1, max_size=30),
    st.floats(0.0, 0.5),
)
def test_fitted_sandwich_covers_sample(pairs, tau):
    w = np.array([p[0] for p in pairs])
    d = np.array([p[1] for p in pairs])
    fit = fit_final_bounds(w, d, tau)
    D = -np.log(d)
    base = D ** (-tau) / np.log(D)
    assert fit.violations == 0
    assert np.all(-fit.M1 * base <= w * (1 - 1e-12) + 1e-300)
    assert np.all(w <= -fit.M2 * base * (1 - 1e-12))


def test_fit_needs_deep_samples():
    with pytest.raises(EmptySample):
        fit_final_bounds(np.array([-1.0]), np.array([0.5]), 0.1)


def test_residual_comparison_separates_models():
    d = np.logspace(-1, -200, 80)
    D = -np.log(d)
    tau = 0.3
    with_ll = -2.0 * D ** (-tau) / np.log(D)
    pure = -2.0 * D ** (-tau)
    assert residual_comparison(with_ll, d, tau).loglog_better
    assert residual_comparison(with_ll, d, tau).loglog_residual == pytest.approx(0.0, abs=1e-9)
    assert not residual_comparison(pure, d, tau).loglog_better
    assert math.isfinite(residual_comparison(pure, d, tau).power_residual)

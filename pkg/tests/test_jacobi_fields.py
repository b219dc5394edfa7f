import math

import numpy as np
import pytest

from jacobi_anosov.config_model import IntegratorConfig, LimitConfig
from jacobi_anosov.curvature_models import expression_profile
from jacobi_anosov.errors import EXIT_CONVERGENCE, ConjugatePointError, ConvergenceError, DomainError
from jacobi_anosov.jacobi_fields import (
    basis_wronskian,
    conjugate_points,
    focal_monotonicity,
    horizon_schedule,
    horizon_slopes,
    jacobi_frame,
    limit_slope,
    quadrature_dt,
    solve_a,
    solve_b,
    solve_basis,
    solve_dt,
    stable_data,
    stable_solution,
    unstable_solution,
)

from conftest import random_profiles


def test_basis_on_hyperbolic_plane(hyperbolic, integrator):
    a = solve_a(hyperbolic, (-3.0, 3.0), integrator)
    b = solve_b(hyperbolic, (-3.0, 3.0), integrator)
    grid = np.linspace(-3.0, 3.0, 61)
    np.testing.assert_allclose(a.f(grid), np.sinh(grid), atol=1e-8)
    np.testing.assert_allclose(b.f(grid), np.cosh(grid), atol=1e-8)


def test_basis_wronskian_is_one(sine, integrator):
    a, b = solve_basis(sine, (-3.0, 3.0), integrator)
    for s in (-3.0, 0.0, 1.7, 3.0):
        assert basis_wronskian(a, b, s) == pytest.approx(1.0, abs=1e-8)
        assert basis_wronskian(b, a, s) == pytest.approx(-1.0, abs=1e-8)


def test_boundary_solution_closed_form(hyperbolic, integrator):
    t = 5.0
    d_t = solve_dt(hyperbolic, t, (-2.0, 2.0), integrator)
    assert d_t.interval == (-2.0, 5.0)
    assert d_t.value_at(0.0)[0] == pytest.approx(1.0, abs=1e-12)
    assert d_t.value_at(t)[0] == pytest.approx(0.0, abs=1e-10)
    for s in (-2.0, 0.5, 2.0, 4.0):
        assert d_t.f(s) == pytest.approx(math.sinh(t - s) / math.sinh(t), rel=1e-8)


def test_boundary_solution_needs_nonzero_t(hyperbolic):
    with pytest.raises(DomainError):
        solve_dt(hyperbolic, 0.0, (-1.0, 1.0))


def test_quadrature_form_agrees(sine, integrator):
    d_t = solve_dt(sine, 6.0, (0.0, 1.0), integrator)
    for s in (0.5, 1.0, 3.0):
        assert quadrature_dt(sine, 6.0, s, integrator) == pytest.approx(d_t.f(s), rel=1e-7)


def test_horizon_schedule():
    flat = expression_profile("0", k=0.0)
    assert horizon_schedule(flat, LimitConfig()) == [8.0, 16.0, 32.0, 64.0, 128.0, 256.0]
    short = expression_profile("-1", k=1.0, domain=(-math.inf, 20.0))
    assert horizon_schedule(short, LimitConfig()) == pytest.approx([2.5, 5.0, 10.0, 20.0])
    odd = expression_profile("-1", k=1.0, domain=(-math.inf, 100.0))
    assert horizon_schedule(odd, LimitConfig()) == [8.0, 16.0, 32.0, 64.0, 100.0]


def test_horizon_slopes_are_minus_coth(hyperbolic, integrator):
    horizons = [1.0, 2.0, 4.0]
    np.testing.assert_allclose(horizon_slopes(hyperbolic, horizons, integrator), -1.0 / np.tanh(horizons), rtol=1e-9)


def test_limit_slope_hyperbolic(hyperbolic, integrator):
    result = limit_slope(hyperbolic, LimitConfig(), integrator)
    assert result.slope == pytest.approx(-1.0, abs=1e-6)
    assert result.method == "cauchy"
    assert result.monotone
    assert result.history[0][0] == 8.0
    assert list(result.history_frame("stable").columns) == ["direction", "horizon", "slope"]


def test_limit_slope_flat_uses_extrapolation(flat, integrator):
    result = limit_slope(flat, LimitConfig(), integrator)
    assert result.slope == pytest.approx(0.0, abs=1e-9)
    assert result.method == "aitken"


def test_limit_slope_reports_non_convergence(hyperbolic, integrator):
    limit = LimitConfig(t_start=8.0, max_horizon=8.0, slope_tol=1e-15)
    with pytest.raises(ConvergenceError) as info:
        limit_slope(hyperbolic, limit, integrator)
    err = info.value
    assert err.exit_code == EXIT_CONVERGENCE
    assert err.horizon == 8.0
    assert err.residual > 0
    assert err.to_dict()["direction"] == "forward"


def _bump(center: float):
    # a bump of positive curvature on kappa = -1; a vanishes twice inside it
    return expression_profile(f"-1 + 2*exp(-((s - {center!r})/3)^8)", k=1.0)


def test_limit_slope_sees_zeros_between_horizons(integrator):
    profile = _bump(24.0)
    with pytest.raises(ConjugatePointError) as info:
        limit_slope(profile, LimitConfig(), integrator)
    brackets = info.value.brackets
    assert len(brackets) == 2
    assert all(16.0 < lo <= hi < 32.0 and hi - lo <= 1e-6 for lo, hi in brackets)

    expected = conjugate_points(profile, (0.0, 32.0), integrator).zeros
    assert len(expected) == 2
    for (lo, hi), (elo, ehi) in zip(brackets, expected):
        assert 0.5 * (lo + hi) == pytest.approx(0.5 * (elo + ehi), abs=1e-6)


def test_backward_limit_reports_zeros_in_original_coordinates(integrator):
    with pytest.raises(ConjugatePointError) as info:
        limit_slope(_bump(-24.0), LimitConfig(), integrator, direction="backward")
    assert all(-32.0 < lo <= hi < -16.0 for lo, hi in info.value.brackets)


@pytest.mark.parametrize("width", [2.75, 3.0, 3.5, 4.25])
def test_stable_data_rejects_paired_zeros(integrator, width):
    profile = expression_profile(f"-1 + 2*exp(-((s - 24)/{width!r})^8)", k=1.0)
    with pytest.raises(ConjugatePointError):
        stable_data(profile, (-4.0, 4.0), LimitConfig(), integrator)


def test_stable_and_unstable_hyperbolic(hyperbolic, integrator):
    d, d_limit = stable_solution(hyperbolic, (-6.0, 6.0), LimitConfig(), integrator)
    grid = np.linspace(-6.0, 6.0, 121)
    np.testing.assert_allclose(d.f(grid), np.exp(-grid), atol=1e-6)
    assert d_limit.slope == pytest.approx(-1.0, abs=1e-6)

    dbar, dbar_limit = unstable_solution(hyperbolic, (-6.0, 6.0), LimitConfig(), integrator)
    np.testing.assert_allclose(dbar.f(grid), np.exp(grid), atol=1e-6)
    assert -dbar_limit.slope == pytest.approx(1.0, abs=1e-6)


def test_stable_data_gap(hyperbolic, integrator):
    data = stable_data(hyperbolic, (-4.0, 4.0), LimitConfig(), integrator)
    assert data.gap == pytest.approx(2.0, abs=1e-5)
    assert data.monotone
    payload = data.to_dict()
    assert payload["d_method"] == "cauchy"
    assert payload["window"] == [-4.0, 4.0]
    history = data.history_frame()
    assert set(history["direction"]) == {"stable", "unstable"}


def test_flat_gap_vanishes(flat, integrator):
    data = stable_data(flat, (-4.0, 4.0), LimitConfig(), integrator)
    assert data.gap == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(data.d.f_values, 1.0, atol=1e-9)


def test_jacobi_frame_columns(sine, integrator):
    window = (-3.0, 3.0)
    a = solve_a(sine, window, integrator)
    data = stable_data(sine, window, LimitConfig(), integrator)
    frame = jacobi_frame(a, data, np.linspace(-3.0, 3.0, 7))
    assert list(frame.columns) == ["s", "a", "ap", "d", "dp", "dbar", "dbarp"]
    assert frame.loc[3, "d"] == pytest.approx(1.0)
    assert frame.loc[3, "a"] == pytest.approx(0.0, abs=1e-15)
    assert data.d_slope < 0 < data.dbar_slope


@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
def test_shift_invariance(sine, integrator, tau):
    data = stable_data(sine, (-3.0, 3.0), LimitConfig(), integrator)
    shifted = stable_data(sine.shifted(tau), (-1.0, 1.0), LimitConfig(), integrator)
    assert shifted.d_slope == pytest.approx(data.d.fp(tau) / data.d.f(tau), abs=1e-6)
    assert shifted.dbar_slope == pytest.approx(data.dbar.fp(tau) / data.dbar.f(tau), abs=1e-6)


def test_time_reversal_duality(integrator):
    for profile in random_profiles(5, seed=9):
        forward = stable_data(profile, (-2.0, 2.0), LimitConfig(), integrator)
        backward = stable_data(profile.reversed(), (-2.0, 2.0), LimitConfig(), integrator)
        assert forward.dbar_slope == pytest.approx(-backward.d_slope, abs=1e-8)
        assert forward.d_slope == pytest.approx(-backward.dbar_slope, abs=1e-8)
        assert forward.dbar.f(1.5) == pytest.approx(backward.d.f(-1.5), abs=1e-8)


@pytest.mark.slow
def test_invariances_on_many_profiles(integrator):
    for profile in random_profiles(20, seed=21):
        base = stable_data(profile, (-3.0, 3.0), LimitConfig(), integrator)
        backward = stable_data(profile.reversed(), (-1.0, 1.0), LimitConfig(), integrator)
        assert base.dbar_slope == pytest.approx(-backward.d_slope, abs=1e-8)
        for tau in (0.5, 1.0, 2.0):
            shifted = stable_data(profile.shifted(tau), (-1.0, 1.0), LimitConfig(), integrator)
            assert shifted.d_slope == pytest.approx(base.d.fp(tau) / base.d.f(tau), abs=1e-6)


def test_limit_sequence_is_nondecreasing():
    config = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
    for profile in random_profiles(5, seed=3):
        slopes = horizon_slopes(profile, [8.0, 16.0, 32.0, 64.0, 128.0], config)
        assert np.all(np.diff(slopes) >= -1e-9)


@pytest.mark.slow
def test_limit_monotonicity_and_gaps_on_many_profiles():
    config = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
    for profile in random_profiles(50, seed=4):
        slopes = horizon_slopes(profile, [8.0, 16.0, 32.0, 64.0, 128.0], config)
        assert np.all(np.diff(slopes) >= -1e-9)
        assert stable_data(profile, (-1.0, 1.0), LimitConfig(), config).gap >= -1e-9


def test_conjugate_points_on_sphere(sphere, integrator):
    report = conjugate_points(sphere, (-7.0, 7.0), integrator)
    assert not report.ok
    centers = [0.5 * (lo + hi) for lo, hi in report.zeros]
    np.testing.assert_allclose(centers, [-2 * math.pi, -math.pi, math.pi, 2 * math.pi], atol=1e-6)
    assert all(hi - lo <= 1e-8 for lo, hi in report.zeros)
    assert report.to_dict()["ok"] is False


def test_no_conjugate_points_in_negative_curvature(sine, integrator):
    assert conjugate_points(sine, (-6.0, 6.0), integrator).ok


def test_conjugate_window_must_contain_zero(hyperbolic):
    with pytest.raises(DomainError):
        conjugate_points(hyperbolic, (1.0, 2.0))


def test_focal_monotonicity(sine, sphere, integrator):
    assert focal_monotonicity(sine, (-6.0, 6.0), integrator).ok
    report = focal_monotonicity(sphere, (-2.0, 2.0), integrator)
    assert not report.ok
    assert abs(report.first_failure) == pytest.approx(math.pi / 2, abs=0.01)

import math

import numpy as np
import pytest
from scipy.interpolate import CubicHermiteSpline

from jacobi_anosov.config_model import IntegratorConfig, SurfaceSpec
from jacobi_anosov.curvature_models import (
    ConformalChart,
    CurvatureProfile,
    build_surface,
    conformal_chart,
    constant_profile,
    estimate_lower_bound,
    eval_curvature,
    expression_profile,
    gaussian_curvature,
    geodesic_profile,
    geodesic_trace,
    honors_lower_bound,
    sample_unit_tangents,
    unit_tangent,
)
from jacobi_anosov.errors import DomainError, InvalidChartError
from jacobi_anosov.expressions import parse_expression


def test_constant_profile_pads_lower_bound():
    p = constant_profile(-1.0)
    assert p.lower_bound_k == pytest.approx(1.05)
    assert p(3.0) == -1.0
    assert p.sample(np.zeros(3)).shape == (3,)
    assert constant_profile(2.0).lower_bound_k == 0.0


def test_shift_and_reverse(sine):
    assert sine.shifted(1.0)(0.25) == pytest.approx(sine(1.25))
    assert sine.reversed()(0.5) == pytest.approx(sine(-0.5))
    finite = expression_profile("s", k=0.0, domain=(0.0, 2.0))
    assert finite.shifted(1.0).domain == (-1.0, 1.0)
    assert finite.reversed().domain == (-2.0, -0.0)


def test_estimated_lower_bound():
    k = estimate_lower_bound(parse_expression("-1 + 0.9*sin(s)"), (-20.0, 20.0))
    assert k == pytest.approx(math.sqrt(1.9) * 1.05, rel=1e-4)
    profile = expression_profile("-1 + 0.9*sin(s)")
    assert profile.lower_bound_k == pytest.approx(k)
    assert honors_lower_bound(profile, (-20.0, 20.0))


def test_declared_bound_can_be_dishonored():
    profile = expression_profile("-4", k=1.0)
    assert not honors_lower_bound(profile, (-1.0, 1.0))


def test_eval_curvature_domain():
    profile = expression_profile("s", k=0.0, domain=(0.0, 1.0))
    assert eval_curvature(profile, 0.5) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        eval_curvature(profile, 2.0)


def test_profile_rejects_bad_fields():
    with pytest.raises(DomainError):
        CurvatureProfile(kappa=lambda s: s, lower_bound_k=-1.0)
    with pytest.raises(DomainError):
        CurvatureProfile(kappa=lambda s: s, lower_bound_k=1.0, domain=(1.0, 1.0))


def test_disk_curvature_is_minus_one(disk):
    rng = np.random.default_rng(0)
    for _ in range(100):
        r = math.sqrt(rng.uniform(0.0, 0.9**2))
        theta = rng.uniform(0.0, 2.0 * math.pi)
        assert gaussian_curvature(disk, r * math.cos(theta), r * math.sin(theta)) == pytest.approx(-1.0, abs=1e-6)


def test_finite_difference_mode_matches_analytic():
    chart = conformal_chart("2 / (1 - x^2 - y^2)", (-1.0, 1.0, -1.0, 1.0), derivative_mode="finite-difference", fd_step=1e-4)
    for x, y in [(0.0, 0.0), (0.3, -0.2), (-0.4, 0.1)]:
        assert gaussian_curvature(chart, x, y) == pytest.approx(-1.0, abs=1e-4)


def test_flat_chart_curvature(flat_chart):
    assert gaussian_curvature(flat_chart, 1.0, -2.0) == pytest.approx(0.0, abs=1e-12)


def test_chart_errors():
    chart = conformal_chart("x", (-1.0, 1.0, -1.0, 1.0))
    with pytest.raises(InvalidChartError):
        gaussian_curvature(chart, -0.5, 0.0)
    with pytest.raises(DomainError):
        gaussian_curvature(chart, 2.0, 0.0)


def test_straight_line_in_flat_chart(flat_chart):
    trace = geodesic_trace(flat_chart, (0.0, 0.0), (1.0, 0.0), 5.0)
    assert trace.exit_reason == "reached-horizon"
    assert trace.length == pytest.approx(5.0)
    assert trace.x[-1] == pytest.approx(5.0, abs=1e-8)
    assert trace.y[-1] == pytest.approx(0.0, abs=1e-8)
    assert list(trace.to_frame().columns) == ["s", "x", "y", "vx", "vy", "kappa"]


def test_flat_trace_leaves_chart(flat_chart):
    trace = geodesic_trace(flat_chart, (0.0, 0.0), (1.0, 0.0), 50.0)
    assert trace.exit_reason == "left-chart-domain"
    assert trace.length == pytest.approx(10.0, abs=1e-6)


def test_disk_geodesic_through_origin(disk):
    trace = geodesic_trace(disk, (0.0, 0.0), unit_tangent(disk, (0.0, 0.0), 0.0), 40.0)
    assert trace.exit_reason == "left-chart-domain"
    near = trace.s <= 5.0
    np.testing.assert_allclose(trace.x[near], np.tanh(trace.s[near] / 2.0), atol=1e-7)
    np.testing.assert_allclose(trace.speed(disk)[near], 1.0, atol=1e-7)
    np.testing.assert_allclose(trace.kappa[near], -1.0, atol=1e-6)


def test_exponential_chart_trace_self_converges():
    # lambda = e^x is flat: w = e^(x + iy) turns its geodesics into straight lines
    chart = conformal_chart("exp(x)", (-2.0, 2.0, -2.0, 2.0))
    v0 = unit_tangent(chart, (0.0, 0.0), math.pi / 4)
    coarse = geodesic_trace(chart, (0.0, 0.0), v0, 3.0, IntegratorConfig(max_step=0.01))
    fine = geodesic_trace(chart, (0.0, 0.0), v0, 3.0, IntegratorConfig(max_step=0.005))
    for trace in (coarse, fine):
        assert trace.exit_reason == "reached-horizon"
        np.testing.assert_allclose(trace.speed(chart), 1.0, atol=1e-8)
        np.testing.assert_allclose(trace.kappa, 0.0, atol=1e-6)

    # the fine trace, Hermite-interpolated onto the coarse nodes
    np.testing.assert_allclose(CubicHermiteSpline(fine.s, fine.x, fine.vx)(coarse.s), coarse.x, atol=1e-6)
    np.testing.assert_allclose(CubicHermiteSpline(fine.s, fine.y, fine.vy)(coarse.s), coarse.y, atol=1e-6)

    w = 1.0 + 3.0 * complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
    assert fine.x[-1] == pytest.approx(math.log(abs(w)), abs=1e-6)
    assert fine.y[-1] == pytest.approx(math.atan2(w.imag, w.real), abs=1e-6)


def test_trace_preconditions(disk):
    with pytest.raises(DomainError):
        geodesic_trace(disk, (0.0, 0.0), (1.0, 0.0), 5.0)
    with pytest.raises(DomainError):
        geodesic_trace(disk, (1.5, 0.0), (0.5, 0.0), 5.0)


def test_geodesic_profile_is_two_sided(disk, fast_integrator):
    profile = geodesic_profile(disk, (0.0, 0.0), unit_tangent(disk, (0.0, 0.0), 0.3), 40.0, fast_integrator)
    lo, hi = profile.domain
    assert lo < -15.0 and hi > 15.0
    np.testing.assert_allclose(profile.sample(np.linspace(-10.0, 10.0, 21)), -1.0, atol=1e-6)
    assert profile.lower_bound_k == pytest.approx(1.05, rel=1e-6)


def test_sample_unit_tangents_is_seeded(disk):
    first = sample_unit_tangents(disk, 5, seed=11)
    assert first == sample_unit_tangents(disk, 5, seed=11)
    for point, tangent in first:
        assert max(abs(point[0]), abs(point[1])) <= 0.5
        assert disk.lam(*point) * math.hypot(*tangent) == pytest.approx(1.0)


def test_build_surface_kinds():
    assert isinstance(build_surface(SurfaceSpec(kind="constant", expression="-1")), CurvatureProfile)
    profile = build_surface(SurfaceSpec(kind="kappa-expression", expression="-1 + 0.5*cos(s)", k_lower_bound=1.3))
    assert profile.lower_bound_k == 1.3
    chart = build_surface(SurfaceSpec(kind="conformal-chart", expression="1", domain=[-1.0, 1.0, -1.0, 1.0]))
    assert isinstance(chart, ConformalChart)
    with pytest.raises(DomainError):
        build_surface(SurfaceSpec(kind="constant", expression="s"))

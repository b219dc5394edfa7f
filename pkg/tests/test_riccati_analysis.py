import math

import numpy as np
import pytest

from jacobi_anosov.config_model import LimitConfig
from jacobi_anosov.errors import DomainError, PoleError
from jacobi_anosov.jacobi_fields import solve_a, stable_data
from jacobi_anosov.riccati_analysis import (
    coth_envelope,
    grid,
    growth_threshold,
    norm_derivative_bound,
    riccati_envelope_frame,
    riccati_from_jacobi,
    stable_slope_bound,
    tail_mass,
    tail_mass_quadrature,
    verify_coth_bound,
    verify_green_bound,
)


def test_grid_covers_interval():
    s = grid((0.0, 1.0), 0.1)
    assert s.size == 11
    assert s[0] == 0.0 and s[-1] == 1.0
    with pytest.raises(DomainError):
        grid((1.0, 1.0), 0.1)


def test_coth_envelope_flat_limit():
    np.testing.assert_allclose(coth_envelope(0.0, [1.0, 2.0]), [1.0, 0.5])
    assert coth_envelope(1.0, 1.0) == pytest.approx(1.0 / math.tanh(1.0))


def test_coth_bound_is_tight_on_hyperbolic_plane(hyperbolic, integrator):
    a = solve_a(hyperbolic, (0.0, 20.0), integrator)
    u = riccati_from_jacobi(a, (0.01, 20.0))
    report = verify_coth_bound(u, 1.0, (0.01, 20.0))
    assert report.passed
    assert report.max_violation <= 1e-7
    payload = report.to_dict()
    assert payload["pass"] is True
    assert payload["bound_name"] == "coth"
    assert payload["interval"] == [0.01, 20.0]


def test_coth_and_norm_derivative_on_sine(sine, integrator):
    k = math.sqrt(1.9)
    a = solve_a(sine, (0.0, 20.0), integrator)
    u = riccati_from_jacobi(a, (0.05, 20.0))
    assert verify_coth_bound(u, k, (0.05, 20.0)).passed
    report = norm_derivative_bound(sine, (0.0, 20.0), k=k, config=integrator, start=0.05, a=a)
    assert report.passed
    assert report.interval == (0.05, 20.0)


def test_coth_bound_fails_for_too_small_k(hyperbolic, integrator):
    a = solve_a(hyperbolic, (0.0, 5.0), integrator)
    report = verify_coth_bound(riccati_from_jacobi(a, (0.5, 5.0)), 0.5, (0.5, 5.0))
    assert not report.passed
    assert report.worst_s == pytest.approx(5.0)


def test_coth_bound_needs_positive_start(hyperbolic, integrator):
    a = solve_a(hyperbolic, (0.0, 2.0), integrator)
    u = riccati_from_jacobi(a, (0.5, 2.0))
    with pytest.raises(DomainError):
        verify_coth_bound(u, 1.0, (0.0, 2.0))


def test_green_and_stable_slope_bounds(hyperbolic, integrator):
    window = (-4.0, 4.0)
    data = stable_data(hyperbolic, window, LimitConfig(), integrator)
    u = riccati_from_jacobi(data.d, window)
    assert verify_green_bound(u, 1.05, window).passed
    failing = verify_green_bound(u, 0.5, window)
    assert not failing.passed
    assert failing.max_violation == pytest.approx(0.5, abs=1e-6)
    assert stable_slope_bound(data, 1.05, window).passed
    assert not stable_slope_bound(data, 0.9, window).passed


def test_pole_is_reported_with_brackets(sphere, integrator):
    a = solve_a(sphere, (0.0, 3.5), integrator)
    with pytest.raises(PoleError) as info:
        riccati_from_jacobi(a, (0.5, 3.5))
    (lo, hi), = info.value.brackets
    assert lo <= math.pi + 1e-6 and hi >= math.pi - 1e-6
    assert hi - lo <= 1e-8
    assert info.value.to_dict()["error"] == "pole"


def test_riccati_interval_must_lie_inside_solution(hyperbolic, integrator):
    a = solve_a(hyperbolic, (0.0, 1.0), integrator)
    with pytest.raises(DomainError):
        riccati_from_jacobi(a, (0.5, 2.0))


def test_tail_mass_matches_closed_form_and_quadrature(hyperbolic, integrator):
    m = tail_mass(hyperbolic, 1.0, LimitConfig(), integrator)
    assert m == pytest.approx(1.0 / math.tanh(1.0) - 1.0, abs=1e-8)
    assert m == pytest.approx(0.3130352855, abs=1e-8)
    assert tail_mass_quadrature(hyperbolic, 1.0, 30.0, integrator) == pytest.approx(m, abs=1e-8)
    with pytest.raises(DomainError):
        tail_mass(hyperbolic, 0.0)


def test_tail_mass_decreases(sine, integrator):
    slope = stable_data(sine, (-1.0, 1.0), LimitConfig(), integrator).d_slope
    masses = [tail_mass(sine, s, config=integrator, slope=slope) for s in (0.5, 1.0, 2.0, 4.0)]
    assert all(m > 0 for m in masses)
    assert np.all(np.diff(masses) < 0)


def test_growth_threshold_hyperbolic(hyperbolic, integrator):
    result = growth_threshold(hyperbolic, 10.0, (-6.0, 6.0), config=integrator)
    assert result.conclusive
    assert result.threshold == pytest.approx(math.asinh(10.0), abs=2e-3)
    assert result.sufficient_threshold == pytest.approx(math.log(801.0) / 2.0, abs=0.01)
    assert result.s0 == pytest.approx(math.atanh(0.5))
    assert result.lower_bound_holds is True
    assert result.to_dict()["radius"] == 10.0


def test_growth_threshold_inconclusive(hyperbolic, integrator):
    result = growth_threshold(hyperbolic, 1e6, (-6.0, 6.0), config=integrator)
    assert not result.conclusive
    assert result.threshold is None


def test_growth_threshold_rejects_bad_radius(hyperbolic):
    with pytest.raises(DomainError):
        growth_threshold(hyperbolic, 0.0, (-6.0, 6.0))


def test_envelope_frame(hyperbolic, integrator):
    a = solve_a(hyperbolic, (0.0, 2.0), integrator)
    frame = riccati_envelope_frame(riccati_from_jacobi(a, (0.5, 2.0)), 1.0, (0.5, 2.0), 0.5)
    assert list(frame.columns) == ["s", "u", "envelope"]
    np.testing.assert_allclose(frame["u"], frame["envelope"], atol=1e-8)

"""Surfaces: curvature profiles along geodesics and conformal charts.

Two sources feed the Jacobi machinery. A :class:`CurvatureProfile` gives the
Gaussian curvature kappa(s) along a unit-speed geodesic directly; a
:class:`ConformalChart` carries a metric lambda(x, y)^2 (dx^2 + dy^2) on a
rectangle, from which geodesics are traced and profiles composed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, NamedTuple

import numpy as np
import pandas as pd
import sympy as sp
from scipy.integrate import solve_ivp

from jacobi_anosov.config.logging import get_logger
from jacobi_anosov.config_model import IntegratorConfig, SurfaceSpec
from jacobi_anosov.errors import DomainError, IntegrationError, InvalidChartError
from jacobi_anosov.expressions import Expression, parse_expression

logger = get_logger(__name__)

BOUND_PADDING = 1.05
ESTIMATE_WINDOW = (-20.0, 20.0)


@dataclass(frozen=True)
class CurvatureProfile:
    """Gaussian curvature kappa(s) along a unit-speed geodesic.

    ``lower_bound_k`` declares kappa(s) > -k^2 on the whole domain.
    ``kappa`` must accept floats and numpy arrays.
    """

    kappa: Callable
    lower_bound_k: float
    domain: tuple[float, float] = (-math.inf, math.inf)
    description: str = ""

    def __post_init__(self):
        lo, hi = self.domain
        if not lo < hi:
            raise DomainError(f"empty profile domain {self.domain}")
        if self.lower_bound_k < 0 or not math.isfinite(self.lower_bound_k):
            raise DomainError(f"lower_bound_k must be a finite nonnegative number, got {self.lower_bound_k}")

    def __call__(self, s):
        return self.kappa(s)

    def contains(self, s: float, tol: float = 1e-12) -> bool:
        lo, hi = self.domain
        return lo - tol <= s <= hi + tol

    def contains_interval(self, interval: tuple[float, float], tol: float = 1e-12) -> bool:
        return self.contains(interval[0], tol) and self.contains(interval[1], tol)

    def shifted(self, tau: float) -> "CurvatureProfile":
        """Profile of the same geodesic started at s = tau: kappa(s + tau)."""
        base = self.kappa
        lo, hi = self.domain
        return CurvatureProfile(
            kappa=lambda s: base(np.asarray(s, dtype=float) + tau),
            lower_bound_k=self.lower_bound_k,
            domain=(lo - tau, hi - tau),
            description=f"{self.description} shifted by {tau:g}",
        )

    def reversed(self) -> "CurvatureProfile":
        """Profile of the reversed geodesic: kappa(-s)."""
        base = self.kappa
        lo, hi = self.domain
        return CurvatureProfile(
            kappa=lambda s: base(-np.asarray(s, dtype=float)),
            lower_bound_k=self.lower_bound_k,
            domain=(-hi, -lo),
            description=f"{self.description} reversed",
        )

    def sample(self, grid) -> np.ndarray:
        grid = np.asarray(grid, dtype=float)
        return np.broadcast_to(np.asarray(self.kappa(grid), dtype=float), grid.shape).copy()


def eval_curvature(profile: CurvatureProfile, s: float) -> float:
    if not profile.contains(s):
        raise DomainError(f"s={s} outside profile domain {profile.domain}")
    value = float(profile.kappa(s))
    if not math.isfinite(value):
        raise DomainError(f"curvature is not finite at s={s}")
    return value


def clip_window(domain: tuple[float, float], window: tuple[float, float]) -> tuple[float, float]:
    return max(domain[0], window[0]), min(domain[1], window[1])


def estimate_lower_bound(kappa: Callable, window: tuple[float, float], samples: int = 4001) -> float:
    """sqrt(max(0, -min kappa)) over the window, padded by 5%."""
    grid = np.linspace(window[0], window[1], samples)
    values = np.broadcast_to(np.asarray(kappa(grid), dtype=float), grid.shape)
    if not np.all(np.isfinite(values)):
        raise DomainError(f"curvature is not finite on the window {window}")
    return math.sqrt(max(0.0, -float(values.min()))) * BOUND_PADDING


def honors_lower_bound(profile: CurvatureProfile, window: tuple[float, float], tol: float = 1e-9, samples: int = 4001) -> bool:
    lo, hi = clip_window(profile.domain, window)
    values = profile.sample(np.linspace(lo, hi, samples))
    return bool(np.all(values >= -profile.lower_bound_k**2 - tol))


def constant_profile(value: float, k: float | None = None, description: str | None = None) -> CurvatureProfile:
    value = float(value)

    def kappa(s):
        s = np.asarray(s, dtype=float)
        out = np.full(s.shape, value)
        return float(out) if out.shape == () else out

    if k is None:
        k = math.sqrt(max(0.0, -value)) * BOUND_PADDING
    return CurvatureProfile(kappa=kappa, lower_bound_k=k, description=description or f"kappa = {value:g}")


def expression_profile(
    source: str,
    k: float | None = None,
    domain: tuple[float, float] = (-math.inf, math.inf),
    estimate_window: tuple[float, float] = ESTIMATE_WINDOW,
) -> CurvatureProfile:
    expr = parse_expression(source, ("s",))
    if k is None:
        k = estimate_lower_bound(expr, clip_window(domain, estimate_window))
        logger.info(f"Estimated lower_bound_k={k:.6g} for kappa(s) = {source}")
    return CurvatureProfile(kappa=expr, lower_bound_k=float(k), domain=tuple(domain), description=f"kappa(s) = {source}")


# --- conformal charts -------------------------------------------------------


@dataclass(frozen=True)
class ConformalChart:
    """Metric lambda(x, y)^2 (dx^2 + dy^2) on the rectangle ``domain``.

    ``domain`` is (x0, x1, y0, y1). In finite-difference mode the partials of
    log(lambda) use central differences with step ``fd_step``.
    """

    conformal_factor: Expression
    domain: tuple[float, float, float, float]
    derivative_mode: Literal["analytic", "finite-difference"] = "analytic"
    fd_step: float = 1e-5
    sample_domain: tuple[float, float, float, float] | None = None
    lambda_cap: float = 1e8
    description: str = ""
    _log_x: Callable = field(init=False, repr=False, compare=False)
    _log_y: Callable = field(init=False, repr=False, compare=False)
    _log_laplacian: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x0, x1, y0, y1 = self.domain
        if not (x0 < x1 and y0 < y1):
            raise DomainError(f"empty chart domain {self.domain}")
        if self.conformal_factor.variables != ("x", "y"):
            raise DomainError("conformal factor must be an expression in (x, y)")
        if self.derivative_mode == "analytic":
            log_tree = sp.log(self.conformal_factor.tree)
            x, y = sp.Symbol("x"), sp.Symbol("y")
            phi_x, phi_y = sp.diff(log_tree, x), sp.diff(log_tree, y)
            laplacian = sp.diff(phi_x, x) + sp.diff(phi_y, y)
            make = self.conformal_factor.with_tree
            object.__setattr__(self, "_log_x", make(phi_x, "d/dx log lambda"))
            object.__setattr__(self, "_log_y", make(phi_y, "d/dy log lambda"))
            object.__setattr__(self, "_log_laplacian", make(laplacian, "laplacian log lambda"))
        elif self.derivative_mode == "finite-difference":
            if not self.fd_step > 0:
                raise DomainError(f"fd_step must be positive, got {self.fd_step}")
            h = self.fd_step
            phi = self._log_lambda
            object.__setattr__(self, "_log_x", lambda x, y: (phi(x + h, y) - phi(x - h, y)) / (2 * h))
            object.__setattr__(self, "_log_y", lambda x, y: (phi(x, y + h) - phi(x, y - h)) / (2 * h))
            object.__setattr__(
                self,
                "_log_laplacian",
                lambda x, y: (phi(x + h, y) + phi(x - h, y) + phi(x, y + h) + phi(x, y - h) - 4 * phi(x, y)) / h**2,
            )
        else:
            raise DomainError(f"unknown derivative_mode {self.derivative_mode!r}")

    def _log_lambda(self, x, y):
        with np.errstate(all="ignore"):
            return np.log(self.conformal_factor(x, y))

    def lam(self, x, y):
        return self.conformal_factor(x, y)

    def margin(self) -> float:
        return self.fd_step if self.derivative_mode == "finite-difference" else 0.0

    def in_rectangle(self, x: float, y: float) -> bool:
        x0, x1, y0, y1 = self.domain
        m = self.margin()
        return x0 + m < x < x1 - m and y0 + m < y < y1 - m

    def is_interior(self, x: float, y: float) -> bool:
        if not self.in_rectangle(x, y):
            return False
        lam = self.lam(x, y)
        return bool(math.isfinite(lam) and 0 < lam <= self.lambda_cap)

    def log_gradient(self, x, y):
        return self._log_x(x, y), self._log_y(x, y)

    def curvature(self, x, y):
        """-laplacian(log lambda) / lambda^2, without domain checks."""
        lam = self.lam(x, y)
        with np.errstate(all="ignore"):
            return -self._log_laplacian(x, y) / lam**2


def gaussian_curvature(chart: ConformalChart, x: float, y: float) -> float:
    if not chart.in_rectangle(x, y):
        raise DomainError(f"({x}, {y}) is not interior to the chart domain {chart.domain}")
    h = chart.margin()
    points = [(x, y)] if h == 0 else [(x, y), (x + h, y), (x - h, y), (x, y + h), (x, y - h)]
    for px, py in points:
        lam = chart.lam(px, py)
        if not (math.isfinite(lam) and lam > 0):
            raise InvalidChartError(f"conformal factor is {lam} at ({px}, {py})", point=[px, py])
    value = float(chart.curvature(x, y))
    if not math.isfinite(value):
        raise InvalidChartError(f"curvature is not finite at ({x}, {y})", point=[x, y])
    return value


def conformal_chart(
    source: str,
    domain: tuple[float, float, float, float],
    derivative_mode: str = "analytic",
    fd_step: float = 1e-5,
    sample_domain: tuple[float, float, float, float] | None = None,
    lambda_cap: float = 1e8,
) -> ConformalChart:
    return ConformalChart(
        conformal_factor=parse_expression(source, ("x", "y")),
        domain=tuple(domain),
        derivative_mode=derivative_mode,
        fd_step=fd_step,
        sample_domain=tuple(sample_domain) if sample_domain is not None else None,
        lambda_cap=lambda_cap,
        description=f"lambda(x, y) = {source}",
    )


# --- geodesics --------------------------------------------------------------


class UnitTangent(NamedTuple):
    point: tuple[float, float]
    tangent: tuple[float, float]


def unit_tangent(chart: ConformalChart, point: tuple[float, float], angle: float) -> tuple[float, float]:
    lam = chart.lam(*point)
    return math.cos(angle) / lam, math.sin(angle) / lam


@dataclass(frozen=True)
class GeodesicTrace:
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    kappa: np.ndarray
    kappa_profile: CurvatureProfile
    exit_reason: Literal["reached-horizon", "left-chart-domain"]

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def speed(self, chart: ConformalChart) -> np.ndarray:
        return chart.lam(self.x, self.y) * np.hypot(self.vx, self.vy)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"s": self.s, "x": self.x, "y": self.y, "vx": self.vx, "vy": self.vy, "kappa": self.kappa})


def _geodesic_rhs(chart: ConformalChart):
    def rhs(s, state):
        x, y, vx, vy = state
        phi_x, phi_y = chart.log_gradient(x, y)
        ax = -phi_x * (vx * vx - vy * vy) - 2.0 * phi_y * vx * vy
        ay = -phi_y * (vy * vy - vx * vx) - 2.0 * phi_x * vx * vy
        return [vx, vy, ax, ay]

    return rhs


def profile_from_trace(
    chart: ConformalChart,
    dense: Callable,
    length: float,
    kappa_samples: np.ndarray,
    description: str = "",
) -> CurvatureProfile:
    """Exact composition s -> gaussian curvature at the dense geodesic point."""

    def kappa(s):
        state = dense(np.clip(np.asarray(s, dtype=float), 0.0, length))
        return chart.curvature(state[0], state[1])

    k = math.sqrt(max(0.0, -float(np.min(kappa_samples)))) * BOUND_PADDING
    return CurvatureProfile(kappa=kappa, lower_bound_k=k, domain=(0.0, length), description=description)


def geodesic_trace(
    chart: ConformalChart,
    p0: tuple[float, float],
    v0: tuple[float, float],
    horizon: float,
    step_control: IntegratorConfig = IntegratorConfig(),
) -> GeodesicTrace:
    """Unit-speed geodesic from ``p0`` with velocity ``v0`` up to ``horizon``.

    The trace stops early, with exit_reason "left-chart-domain", when it leaves
    the rectangle or lambda exceeds ``chart.lambda_cap``.
    """
    x, y = map(float, p0)
    if not chart.is_interior(x, y):
        raise DomainError(f"base point ({x}, {y}) is not interior to the chart")
    speed = chart.lam(x, y) * math.hypot(*v0)
    if abs(speed - 1.0) > 1e-9:
        raise DomainError(f"initial velocity has metric norm {speed}, expected 1")
    if not horizon > 0:
        raise DomainError(f"horizon must be positive, got {horizon}")

    x0, x1, y0, y1 = chart.domain
    m = chart.margin() + 1e-12 * max(x1 - x0, y1 - y0)

    def leave_rectangle(s, state):
        return min(state[0] - x0, x1 - state[0], state[1] - y0, y1 - state[1]) - m

    def exceed_cap(s, state):
        lam = chart.lam(state[0], state[1])
        return chart.lambda_cap - lam if math.isfinite(lam) and lam > 0 else -1.0

    for event in (leave_rectangle, exceed_cap):
        event.terminal = True
        event.direction = -1

    sol = solve_ivp(
        _geodesic_rhs(chart),
        (0.0, float(horizon)),
        [x, y, float(v0[0]), float(v0[1])],
        method=step_control.adaptive_method,
        rtol=step_control.rel_tol,
        atol=step_control.abs_tol,
        max_step=step_control.max_step,
        events=(leave_rectangle, exceed_cap),
        dense_output=True,
    )
    if sol.status == -1:
        raise IntegrationError(f"geodesic integration failed: {sol.message}", last_good_interval=(0.0, float(sol.t[-1])))
    steps = np.diff(sol.t)
    if steps.size > 1 and steps[:-1].min() < step_control.min_step:
        raise IntegrationError("step-size underflow while tracing geodesic", last_good_interval=(0.0, float(sol.t[-1])))

    exit_reason = "left-chart-domain" if sol.status == 1 else "reached-horizon"
    if float(sol.t[-1]) <= 0:
        raise DomainError(f"geodesic from ({x}, {y}) leaves the chart immediately")

    kappa_samples = np.asarray(chart.curvature(sol.y[0], sol.y[1]), dtype=float)
    profile = profile_from_trace(chart, sol.sol, float(sol.t[-1]), kappa_samples, f"geodesic of {chart.description} from ({x:.6g}, {y:.6g})")
    logger.info(f"Traced geodesic of length {sol.t[-1]:.4g} ({exit_reason}) with {sol.t.size} samples")
    return GeodesicTrace(
        s=sol.t,
        x=sol.y[0],
        y=sol.y[1],
        vx=sol.y[2],
        vy=sol.y[3],
        kappa=kappa_samples,
        kappa_profile=profile,
        exit_reason=exit_reason,
    )


def geodesic_profile(
    chart: ConformalChart,
    p0: tuple[float, float],
    v0: tuple[float, float],
    horizon: float,
    step_control: IntegratorConfig = IntegratorConfig(),
) -> CurvatureProfile:
    """Curvature along the whole geodesic through ``p0``, s = 0 at ``p0``.

    Traces ``v0`` forward and ``-v0`` backward; the domain is
    [-backward length, forward length].
    """
    forward = geodesic_trace(chart, p0, v0, horizon, step_control).kappa_profile
    backward = geodesic_trace(chart, p0, (-v0[0], -v0[1]), horizon, step_control).kappa_profile
    fwd_len, bwd_len = forward.domain[1], backward.domain[1]

    def kappa(s):
        s = np.asarray(s, dtype=float)
        if s.ndim == 0:
            return forward.kappa(min(float(s), fwd_len)) if s >= 0 else backward.kappa(min(-float(s), bwd_len))
        return np.where(s >= 0, forward.kappa(np.clip(s, 0, fwd_len)), backward.kappa(np.clip(-s, 0, bwd_len)))

    return CurvatureProfile(
        kappa=kappa,
        lower_bound_k=max(forward.lower_bound_k, backward.lower_bound_k),
        domain=(-bwd_len, fwd_len),
        description=forward.description,
    )


def sample_unit_tangents(chart: ConformalChart, count: int, seed: int) -> list[UnitTangent]:
    """Seeded base points in the sampling rectangle with uniform directions."""
    if count < 1:
        raise DomainError(f"count must be at least 1, got {count}")
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = chart.sample_domain or chart.domain

    samples: list[UnitTangent] = []
    attempts = 0
    while len(samples) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise DomainError(f"no interior points found in {chart.sample_domain or chart.domain}")
        x = float(rng.uniform(x0, x1))
        y = float(rng.uniform(y0, y1))
        angle = float(rng.uniform(0.0, 2.0 * math.pi))
        if not chart.is_interior(x, y):
            continue
        samples.append(UnitTangent(point=(x, y), tangent=unit_tangent(chart, (x, y), angle)))
    return samples


def build_surface(spec: SurfaceSpec) -> CurvatureProfile | ConformalChart:
    """Profile or chart described by a validated surface config section."""
    if spec.kind == "conformal-chart":
        return conformal_chart(
            spec.expression,
            tuple(spec.domain),
            derivative_mode=spec.derivative_mode,
            fd_step=spec.fd_step,
            sample_domain=spec.sample_domain,
            lambda_cap=spec.lambda_cap,
        )
    if spec.kind == "constant":
        expr = parse_expression(str(spec.expression), ("s",))
        if not expr.is_constant:
            raise DomainError(f"constant surface needs a numeric expression, got {spec.expression!r}")
        profile = constant_profile(expr(0.0), k=spec.k_lower_bound)
        if spec.domain is not None:
            profile = replace(profile, domain=tuple(spec.domain))
        return profile
    domain = tuple(spec.domain) if spec.domain is not None else (-math.inf, math.inf)
    return expression_profile(spec.expression, k=spec.k_lower_bound, domain=domain)

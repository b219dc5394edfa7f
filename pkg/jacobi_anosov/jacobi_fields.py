"""Distinguished solutions of f'' + kappa f = 0 along one geodesic.

a and b are the basis with a(0)=0, a'(0)=1 and b(0)=1, b'(0)=0. For t != 0,
d_t = b - (b(t)/a(t)) a is the solution with d_t(0)=1 and d_t(t)=0. The
stable solution d is the limit of d_t as t -> +inf; the unstable solution
dbar is the limit as t -> -inf, obtained from the reversed geodesic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import pandas as pd
from scipy.integrate import quad

from jacobi_anosov.config.logging import get_logger
from jacobi_anosov.config_model import IntegratorConfig, LimitConfig
from jacobi_anosov.curvature_models import CurvatureProfile, clip_window
from jacobi_anosov.errors import ConjugatePointError, ConvergenceError, DomainError
from jacobi_anosov.ode_core import (
    ScalarSolution,
    bracket_root,
    combine,
    integrate_jacobi,
    integrate_jacobi_system,
    propagate_with_zeros,
    sign_changes,
    wronskian,
)

logger = get_logger(__name__)

ZERO_THRESHOLD = 1e-12
MONOTONE_TOL = 1e-10


def solve_a(profile: CurvatureProfile, window: tuple[float, float], config: IntegratorConfig = IntegratorConfig()) -> ScalarSolution:
    return integrate_jacobi(profile, 0.0, 0.0, 1.0, window, config)


def solve_b(profile: CurvatureProfile, window: tuple[float, float], config: IntegratorConfig = IntegratorConfig()) -> ScalarSolution:
    return integrate_jacobi(profile, 0.0, 1.0, 0.0, window, config)


def solve_basis(
    profile: CurvatureProfile,
    window: tuple[float, float],
    config: IntegratorConfig = IntegratorConfig(),
    breakpoints=(),
) -> tuple[ScalarSolution, ScalarSolution]:
    """a and b on one shared node set."""
    a, b = integrate_jacobi_system(profile, 0.0, [(0.0, 1.0), (1.0, 0.0)], window, config, breakpoints)
    return a, b


def basis_wronskian(a: ScalarSolution, b: ScalarSolution, s: float) -> float:
    """W(a, b)(s); +1 for the exact basis."""
    return wronskian(a, b, s)


def solve_dt(
    profile: CurvatureProfile,
    t: float,
    window: tuple[float, float],
    config: IntegratorConfig = IntegratorConfig(),
) -> ScalarSolution:
    """d_t = b - (b(t)/a(t)) a on the window extended to contain t."""
    if t == 0:
        raise DomainError("d_t needs t != 0")
    interval = (min(window[0], t, 0.0), max(window[1], t, 0.0))
    a, b = solve_basis(profile, interval, config, breakpoints=(t,))
    a_t, _ = a.value_at(t)
    b_t, _ = b.value_at(t)
    if abs(a_t) < ZERO_THRESHOLD:
        raise ConjugatePointError(f"a vanishes at t={t}: conjugate point", brackets=[(t, t)])
    return combine([b, a], [1.0, -b_t / a_t])


def quadrature_dt(
    profile: CurvatureProfile,
    t: float,
    s: float,
    config: IntegratorConfig = IntegratorConfig(),
    a: ScalarSolution | None = None,
) -> float:
    """a(s) * integral_s^t a(u)^-2 du, for 0 < s <= t."""
    if not 0 < s <= t:
        raise DomainError(f"quadrature form needs 0 < s <= t, got s={s}, t={t}")
    if a is None or not a.contains(t):
        a = solve_a(profile, (0.0, t), config)
    integral, _ = quad(lambda u: a.f(u) ** -2, s, t, epsabs=1e-14, epsrel=1e-12, limit=200)
    return a.f(s) * integral


# --- stable and unstable limits ---------------------------------------------


def horizon_schedule(profile: CurvatureProfile, limit: LimitConfig) -> list[float]:
    """Horizons t_start * growth^j up to the reachable horizon H, H appended."""
    reach = min(limit.max_horizon, profile.domain[1])
    if not reach > 0:
        raise DomainError(f"profile domain {profile.domain} has no room for a forward horizon")
    g = limit.growth_factor
    horizons = []
    t = limit.t_start
    while t <= reach * (1 + 1e-12):
        horizons.append(t)
        t *= g
    if not horizons or reach > horizons[-1] * (1 + 1e-12):
        horizons.append(reach)
    if len(horizons) < 4:
        horizons = [reach / g**3, reach / g**2, reach / g, reach]
    return horizons


def _iter_slopes(profile: CurvatureProfile, horizons, config: IntegratorConfig, orientation: float = 1.0):
    """(T, d_T'(0)) per horizon; zeros of a are reported in the coordinates s = orientation * T."""
    state = np.array([[0.0, 1.0], [1.0, 0.0]])
    s = 0.0
    for t in horizons:
        state, zeros = propagate_with_zeros(profile, s, state, float(t), config)
        if zeros:
            brackets = [tuple(sorted((orientation * lo, orientation * hi))) for lo, hi in zeros]
            raise ConjugatePointError(f"a vanishes on ({s:g}, {t:g}]: conjugate point", brackets=brackets)
        a_t, b_t = state[0, 0], state[1, 0]
        if not a_t > ZERO_THRESHOLD * np.abs(state).max():
            raise ConjugatePointError(f"a vanishes at T={t:g}: conjugate point", brackets=[(orientation * t, orientation * t)])
        yield float(t), float(-b_t / a_t)
        # b/a is scale invariant; renormalize to keep both finite
        state = state / np.abs(state).max()
        s = float(t)


def horizon_slopes(profile: CurvatureProfile, horizons, config: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """d_T'(0) = -b(T)/a(T) for increasing horizons T > 0."""
    return np.array([x for _, x in _iter_slopes(profile, horizons, config)])


@dataclass(frozen=True)
class LimitResult:
    slope: float
    method: Literal["cauchy", "tail", "aitken"]
    residual: float
    horizon_used: float
    history: list[tuple[float, float]]
    monotone: bool

    def history_frame(self, direction: str) -> pd.DataFrame:
        return pd.DataFrame(
            {"direction": direction, "horizon": [h for h, _ in self.history], "slope": [x for _, x in self.history]}
        )


def _aitken(x0: float, x1: float, x2: float) -> float | None:
    denom = (x2 - x1) - (x1 - x0)
    if denom == 0:
        return None
    return x2 - (x2 - x1) ** 2 / denom


def limit_slope(
    profile: CurvatureProfile,
    limit: LimitConfig = LimitConfig(),
    config: IntegratorConfig = IntegratorConfig(),
    direction: Literal["forward", "backward"] = "forward",
) -> LimitResult:
    """lim d_T'(0) as T -> +inf (forward) or of the reversed profile (backward).

    Each horizon accepts the first of: consecutive slopes agreeing within
    ``slope_tol``; a geometric tail estimate below ``slope_tol``; two
    consecutive Aitken extrapolants agreeing within ``slope_tol``.
    """
    if direction == "backward":
        profile = profile.reversed()
    tol = limit.slope_tol
    horizons = horizon_schedule(profile, limit)
    logger.info(f"Limit schedule ({direction}): {', '.join(f'{h:g}' for h in horizons)}")

    xs: list[float] = []
    history: list[tuple[float, float]] = []
    monotone = True
    extrapolants: list[float] = []
    residual = math.inf
    for t, x in _iter_slopes(profile, horizons, config, 1.0 if direction == "forward" else -1.0):
        if xs and x < xs[-1] - MONOTONE_TOL:
            monotone = False
            logger.warning(f"d_T'(0) decreased from {xs[-1]:.12g} to {x:.12g} at T={t:g}")
        xs.append(x)
        history.append((float(t), x))
        if len(xs) < 2:
            continue

        delta = xs[-1] - xs[-2]
        residual = abs(delta)
        if residual < tol:
            return LimitResult(x, "cauchy", residual, float(t), history, monotone)
        if len(xs) >= 3:
            prev = xs[-2] - xs[-3]
            if prev != 0:
                ratio = delta / prev
                if 0 < ratio < 1:
                    tail = delta * ratio / (1 - ratio)
                    if abs(tail) < tol:
                        return LimitResult(x + tail, "tail", abs(tail), float(t), history, monotone)
            extrapolant = _aitken(*xs[-3:])
            if extrapolant is not None:
                extrapolants.append(extrapolant)
                if len(extrapolants) >= 2 and abs(extrapolants[-1] - extrapolants[-2]) < tol:
                    return LimitResult(extrapolants[-1], "aitken", abs(extrapolants[-1] - extrapolants[-2]), float(t), history, monotone)

    raise ConvergenceError(
        f"stable slope did not converge by horizon {horizons[-1]:g}",
        residual=residual,
        horizon=horizons[-1],
        direction=direction,
    )


def stable_solution(
    profile: CurvatureProfile,
    window: tuple[float, float],
    limit: LimitConfig = LimitConfig(),
    config: IntegratorConfig = IntegratorConfig(),
) -> tuple[ScalarSolution, LimitResult]:
    """d, integrated from d(0)=1, d'(0)=lim d_T'(0)."""
    result = limit_slope(profile, limit, config, "forward")
    return integrate_jacobi(profile, 0.0, 1.0, result.slope, window, config), result


def unstable_solution(
    profile: CurvatureProfile,
    window: tuple[float, float],
    limit: LimitConfig = LimitConfig(),
    config: IntegratorConfig = IntegratorConfig(),
) -> tuple[ScalarSolution, LimitResult]:
    """dbar, the reflection of the stable solution of the reversed profile."""
    result = limit_slope(profile, limit, config, "backward")
    reflected_window = (-window[1], -window[0])
    d_rev = integrate_jacobi(profile.reversed(), 0.0, 1.0, result.slope, reflected_window, config)
    return d_rev.reflected(), result


@dataclass(frozen=True)
class StableData:
    d: ScalarSolution
    dbar: ScalarSolution
    d_slope: float
    dbar_slope: float
    residual: float
    horizon_used: float
    d_method: str
    dbar_method: str
    window: tuple[float, float]
    d_limit: LimitResult = field(repr=False)
    dbar_limit: LimitResult = field(repr=False)

    @property
    def gap(self) -> float:
        return self.dbar_slope - self.d_slope

    @property
    def monotone(self) -> bool:
        return self.d_limit.monotone and self.dbar_limit.monotone

    def to_dict(self) -> dict:
        return {
            "d_slope": self.d_slope,
            "dbar_slope": self.dbar_slope,
            "gap": self.gap,
            "residual": self.residual,
            "horizon_used": self.horizon_used,
            "d_method": self.d_method,
            "dbar_method": self.dbar_method,
            "monotone": self.monotone,
            "window": list(self.window),
        }

    def history_frame(self) -> pd.DataFrame:
        return pd.concat([self.d_limit.history_frame("stable"), self.dbar_limit.history_frame("unstable")], ignore_index=True)

    def to_frame(self, grid) -> pd.DataFrame:
        grid = np.asarray(grid, dtype=float)
        return pd.DataFrame(
            {"s": grid, "d": self.d.f(grid), "dp": self.d.fp(grid), "dbar": self.dbar.f(grid), "dbarp": self.dbar.fp(grid)}
        )


def stable_data(
    profile: CurvatureProfile,
    window: tuple[float, float],
    limit: LimitConfig = LimitConfig(),
    config: IntegratorConfig = IntegratorConfig(),
) -> StableData:
    window = clip_window(profile.domain, window)
    d, d_limit = stable_solution(profile, window, limit, config)
    dbar, dbar_limit = unstable_solution(profile, window, limit, config)
    data = StableData(
        d=d,
        dbar=dbar,
        d_slope=d_limit.slope,
        dbar_slope=-dbar_limit.slope,
        residual=max(d_limit.residual, dbar_limit.residual),
        horizon_used=max(d_limit.horizon_used, dbar_limit.horizon_used),
        d_method=d_limit.method,
        dbar_method=dbar_limit.method,
        window=tuple(window),
        d_limit=d_limit,
        dbar_limit=dbar_limit,
    )
    logger.info(f"Stable data: d'(0)={data.d_slope:.10g}, dbar'(0)={data.dbar_slope:.10g}, gap={data.gap:.6g}")
    return data


def jacobi_frame(a: ScalarSolution, stable: StableData, grid) -> pd.DataFrame:
    grid = np.asarray(grid, dtype=float)
    frame = stable.to_frame(grid)
    frame.insert(1, "a", a.f(grid))
    frame.insert(2, "ap", a.fp(grid))
    return frame


# --- conjugate and focal points ---------------------------------------------


@dataclass(frozen=True)
class ConjugateReport:
    zeros: list[tuple[float, float]]

    @property
    def ok(self) -> bool:
        return not self.zeros

    def to_dict(self) -> dict:
        return {"ok": self.ok, "zeros": [list(z) for z in self.zeros]}


def conjugate_points(
    profile: CurvatureProfile,
    window: tuple[float, float],
    config: IntegratorConfig = IntegratorConfig(),
    a: ScalarSolution | None = None,
) -> ConjugateReport:
    """Zeros of a(s), s != 0, bracketed to width <= 1e-8."""
    if not window[0] <= 0 <= window[1]:
        raise DomainError(f"window {window} must contain 0")
    if a is None:
        a = solve_a(profile, window, config)
    zeros = [bracket_root(a.f, lo, hi, width=1e-8) for lo, hi in sign_changes(a, window, exclude=0.0)]
    if zeros:
        logger.info(f"Found {len(zeros)} conjugate point(s) of s=0: {', '.join(f'{0.5 * (lo + hi):.8g}' for lo, hi in zeros)}")
    return ConjugateReport(zeros=zeros)


@dataclass(frozen=True)
class FocalReport:
    ok: bool
    first_failure: float | None

    def to_dict(self) -> dict:
        return {"ok": self.ok, "first_failure": self.first_failure}


def focal_monotonicity(
    profile: CurvatureProfile,
    window: tuple[float, float],
    config: IntegratorConfig = IntegratorConfig(),
    tol: float = 1e-9,
    a: ScalarSolution | None = None,
) -> FocalReport:
    """|a(s)| nondecreasing away from s = 0 on both sides of the window.

    Checked through sign(a) a' >= -tol at the nodes; the reported failure is
    the one closest to 0.
    """
    if a is None:
        a = solve_a(profile, window, config)
    sol = a.restricted(window)
    s, f, fp = sol.nodes, sol.f_values, sol.fp_values
    outward = np.sign(s) * np.sign(f) * fp
    failing = (s != 0) & (outward < -tol)
    if not failing.any():
        return FocalReport(ok=True, first_failure=None)
    where = s[failing]
    first = float(where[np.argmin(np.abs(where))])
    logger.info(f"|a| stops increasing near s={first:.6g}")
    return FocalReport(ok=False, first_failure=first)

"""Riccati quotients u = f'/f and grid checks of the comparison bounds.

Every check is a grid scan: it reports the largest violation and where it
occurs, never a proof. Scans of the coth envelope start away from s = 0,
where the envelope diverges.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd
from scipy.integrate import quad

from jacobi_anosov.config.logging import get_logger
from jacobi_anosov.config_model import IntegratorConfig, LimitConfig
from jacobi_anosov.curvature_models import CurvatureProfile, clip_window
from jacobi_anosov.errors import ConjugatePointError, DomainError, PoleError
from jacobi_anosov.jacobi_fields import StableData, horizon_slopes, limit_slope, solve_a, solve_basis
from jacobi_anosov.ode_core import RiccatiSolution, ScalarSolution, bracket_root, sign_changes

logger = get_logger(__name__)

DEFAULT_GRID_STEP = 1e-3
DEFAULT_TOL = 1e-7
COTH_START = 0.01


@dataclass(frozen=True)
class BoundReport:
    bound_name: str
    max_violation: float
    worst_s: float
    passed: bool
    grid_step: float
    interval: tuple[float, float]
    tol: float
    # Finite windows can falsify but not verify bounds that need all of R
    scope: str = "on window"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        d["interval"] = list(self.interval)
        return d


def grid(interval: tuple[float, float], step: float) -> np.ndarray:
    lo, hi = interval
    if not lo < hi:
        raise DomainError(f"empty interval {interval}")
    n = max(2, int(math.ceil((hi - lo) / step - 1e-9)) + 1)
    return np.linspace(lo, hi, n)


def coth_envelope(k: float, s) -> np.ndarray:
    """k coth(k s), with the k -> 0 limit 1/s."""
    s = np.asarray(s, dtype=float)
    if k == 0:
        return 1.0 / s
    return k / np.tanh(k * s)


def _report(name: str, s: np.ndarray, violation: np.ndarray, step: float, interval, tol: float) -> BoundReport:
    i = int(np.argmax(violation))
    worst = float(violation[i])
    report = BoundReport(
        bound_name=name,
        max_violation=worst,
        worst_s=float(s[i]),
        passed=bool(worst <= tol),
        grid_step=step,
        interval=(float(interval[0]), float(interval[1])),
        tol=tol,
    )
    logger.info(f"{name}: max violation {worst:.3e} at s={report.worst_s:.6g} ({'pass' if report.passed else 'fail'})")
    return report


def riccati_from_jacobi(f: ScalarSolution, interval: tuple[float, float]) -> RiccatiSolution:
    """u = f'/f on an interval where f does not vanish."""
    if not f.contains(np.asarray(interval)):
        raise DomainError(f"interval {interval} not inside solution interval {f.interval}")
    changes = sign_changes(f, interval)
    if changes or np.any(f.restricted(interval).f_values == 0):
        brackets = [bracket_root(f.f, lo, hi, width=1e-8) for lo, hi in changes]
        raise PoleError(f"f vanishes inside {list(interval)}; u = f'/f has a pole", brackets=brackets)
    return RiccatiSolution(interval=(float(interval[0]), float(interval[1])), evaluate=lambda s: f.fp(s) / f.f(s))


def verify_green_bound(
    u: RiccatiSolution,
    k: float,
    interval: tuple[float, float],
    grid_step: float = DEFAULT_GRID_STEP,
    tol: float = DEFAULT_TOL,
) -> BoundReport:
    """|u(s)| <= k on the grid."""
    s = grid(interval, grid_step)
    return _report("green", s, np.abs(u(s)) - k, grid_step, interval, tol)


def verify_coth_bound(
    u: RiccatiSolution,
    k: float,
    interval: tuple[float, float],
    grid_step: float = DEFAULT_GRID_STEP,
    tol: float = DEFAULT_TOL,
) -> BoundReport:
    """|u(s)| <= k coth(k s) on a grid inside (0, inf)."""
    if not interval[0] > 0:
        raise DomainError(f"the coth envelope needs an interval inside (0, inf), got {interval}")
    s = grid(interval, grid_step)
    return _report("coth", s, np.abs(u(s)) - coth_envelope(k, s), grid_step, interval, tol)


def norm_derivative_bound(
    profile: CurvatureProfile,
    window: tuple[float, float],
    k: float | None = None,
    config: IntegratorConfig = IntegratorConfig(),
    start: float = COTH_START,
    grid_step: float = DEFAULT_GRID_STEP,
    tol: float = DEFAULT_TOL,
    a: ScalarSolution | None = None,
) -> BoundReport:
    """|a'(s)| <= k coth(k s) |a(s)| for s in [start, window_hi].

    The violation is divided by max(1, |a|) so the tolerance stays meaningful
    for exponentially growing a.
    """
    k = profile.lower_bound_k if k is None else k
    interval = (start, clip_window(profile.domain, window)[1])
    if a is None or not a.contains(np.asarray(interval)):
        a = solve_a(profile, (0.0, interval[1]), config)
    s = grid(interval, grid_step)
    f, fp = a.f(s), a.fp(s)
    violation = (np.abs(fp) - coth_envelope(k, s) * np.abs(f)) / np.maximum(1.0, np.abs(f))
    return _report("norm-derivative", s, violation, grid_step, interval, tol)


def tail_mass(
    profile: CurvatureProfile,
    s: float,
    limit: LimitConfig = LimitConfig(),
    config: IntegratorConfig = IntegratorConfig(),
    slope: float | None = None,
) -> float:
    """m(s) = d'(0) - d_s'(0), the mass of a^-2 beyond s."""
    if not s > 0:
        raise DomainError(f"tail mass needs s > 0, got {s}")
    if slope is None:
        slope = limit_slope(profile, limit, config).slope
    return slope - float(horizon_slopes(profile, [s], config)[0])


def tail_mass_quadrature(
    profile: CurvatureProfile,
    s: float,
    upper: float,
    config: IntegratorConfig = IntegratorConfig(),
) -> float:
    """integral_s^upper a(u)^-2 du by adaptive quadrature."""
    if not 0 < s < upper:
        raise DomainError(f"need 0 < s < upper, got s={s}, upper={upper}")
    a = solve_a(profile, (0.0, upper), config)
    value, _ = quad(lambda x: a.f(x) ** -2, s, upper, epsabs=1e-14, epsrel=1e-12, limit=500)
    return value


@dataclass(frozen=True)
class GrowthThreshold:
    radius: float
    threshold: float | None
    conclusive: bool
    sufficient_threshold: float | None
    s0: float | None
    lower_bound_holds: bool | None
    grid_step: float

    def to_dict(self) -> dict:
        return asdict(self)


def growth_threshold(
    profile: CurvatureProfile,
    radius: float,
    window: tuple[float, float],
    k: float | None = None,
    limit: LimitConfig = LimitConfig(),
    config: IntegratorConfig = IntegratorConfig(),
    grid_step: float = DEFAULT_GRID_STEP,
) -> GrowthThreshold:
    """Smallest grid T with |a(s)| >= radius for every grid s >= T in the window.

    Cross-checked against |a(s)| >= (4k m(s))^-1/2, valid from
    s0 = artanh(1/2)/k on; the sufficient threshold is the first grid
    s >= s0 with m(s) <= 1/(4k radius^2).
    """
    if not radius > 0:
        raise DomainError(f"radius must be positive, got {radius}")
    k = profile.lower_bound_k if k is None else k
    hi = clip_window(profile.domain, window)[1]
    if not hi > 0:
        raise DomainError(f"window {window} has no positive part")
    a, b = solve_basis(profile, (0.0, hi), config)
    s = grid((0.0, hi), grid_step)
    f = a.f(s)
    if np.any(f[1:] <= 0):
        raise ConjugatePointError("a vanishes on the window: conjugate point", brackets=[(lo, hi_) for lo, hi_ in sign_changes(a, exclude=0.0)])

    below = np.flatnonzero(np.abs(f) < radius)
    last = int(below[-1])
    conclusive = last < s.size - 1
    threshold = float(s[last + 1]) if conclusive else None

    sufficient, s0, holds = None, None, None
    if k > 0:
        s0 = math.atanh(0.5) / k
        slope = limit_slope(profile, limit, config).slope
        tail = s >= s0
        if tail.any():
            st = s[tail]
            # m(s) = d'(0) - d_s'(0) = d'(0) + b(s)/a(s)
            m = slope + b.f(st) / f[tail]
            positive = m > 0
            lower = np.full(st.shape, np.inf)
            lower[positive] = 1.0 / np.sqrt(4.0 * k * m[positive])
            holds = bool(np.all(np.abs(f[tail]) >= lower * (1 - 1e-6)))
            ok = np.flatnonzero(m <= 1.0 / (4.0 * k * radius**2))
            if ok.size:
                sufficient = float(st[ok[0]])
    if not conclusive:
        logger.warning(f"|a| stays below {radius:g} up to the window end {hi:g}; growth threshold inconclusive")
    return GrowthThreshold(radius, threshold, conclusive, sufficient, s0, holds, grid_step)


def stable_slope_bound(
    stable: StableData,
    k: float,
    window: tuple[float, float],
    grid_step: float = DEFAULT_GRID_STEP,
    tol: float = DEFAULT_TOL,
) -> BoundReport:
    """|d'| <= k |d| and |dbar'| <= k |dbar|, as |d'|/|d| - k."""
    interval = (max(window[0], stable.window[0]), min(window[1], stable.window[1]))
    s = grid(interval, grid_step)
    violations = []
    for sol in (stable.d, stable.dbar):
        f = sol.f(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(f != 0, np.abs(sol.fp(s)) / np.abs(f), np.inf)
        violations.append(ratio - k)
    return _report("stable-slope", s, np.maximum(*violations), grid_step, interval, tol)


def riccati_envelope_frame(u: RiccatiSolution, k: float, interval: tuple[float, float], step: float) -> pd.DataFrame:
    s = grid(interval, step)
    return pd.DataFrame({"s": s, "u": u(s), "envelope": coth_envelope(k, s)})

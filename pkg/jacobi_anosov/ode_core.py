"""Integration of the scalar Jacobi equation f'' + kappa f = 0 and the
Riccati equation u' + u^2 + kappa = 0.

Jacobi solutions are integrated with scipy's embedded Runge-Kutta pairs (or
a classical fixed-step RK4 when reproducibility across scipy versions
matters) and stored as :class:`ScalarSolution` objects: node values of f and
f' joined by cubic Hermite interpolation. Several solutions of the same
equation are integrated together so they share one node set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from jacobi_anosov.config.logging import get_logger
from jacobi_anosov.config_model import IntegratorConfig
from jacobi_anosov.curvature_models import CurvatureProfile
from jacobi_anosov.errors import DomainError, IntegrationError

logger = get_logger(__name__)

# Classical fourth-order tableau
_RK4_A = ((), (0.5,), (0.0, 0.5), (0.0, 0.0, 1.0))
_RK4_B = (1 / 6, 1 / 3, 1 / 3, 1 / 6)
_RK4_C = (0.0, 0.5, 0.5, 1.0)

# Last steps shorter than this fraction of the step bound are merged into the previous step
NODE_MERGE_FRACTION = 1e-6


@dataclass(frozen=True)
class ScalarSolution:
    """A solution of f'' + kappa f = 0 known at ``nodes``.

    f is the Hermite cubic through (f, f'); f' is the Hermite cubic through
    (f', f'') with f'' = -kappa f, so both are C^1 across nodes.
    """

    nodes: np.ndarray
    f_values: np.ndarray
    fp_values: np.ndarray
    kappa_values: np.ndarray
    _f: CubicHermiteSpline = field(init=False, repr=False, compare=False)
    _fp: CubicHermiteSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.nodes.size < 2 or np.any(np.diff(self.nodes) <= 0):
            raise DomainError("a solution needs at least two strictly increasing nodes")
        object.__setattr__(self, "_f", CubicHermiteSpline(self.nodes, self.f_values, self.fp_values, extrapolate=False))
        object.__setattr__(
            self, "_fp", CubicHermiteSpline(self.nodes, self.fp_values, -self.kappa_values * self.f_values, extrapolate=False)
        )

    @property
    def interval(self) -> tuple[float, float]:
        return float(self.nodes[0]), float(self.nodes[-1])

    def contains(self, s, tol: float = 1e-12) -> bool:
        lo, hi = self.interval
        s = np.asarray(s, dtype=float)
        return bool(np.all((s >= lo - tol) & (s <= hi + tol)))

    def _eval(self, spline, s):
        if not self.contains(s):
            raise DomainError(f"s outside solution interval {self.interval}")
        lo, hi = self.interval
        out = spline(np.clip(np.asarray(s, dtype=float), lo, hi))
        return float(out) if np.ndim(out) == 0 else out

    def f(self, s):
        return self._eval(self._f, s)

    def fp(self, s):
        return self._eval(self._fp, s)

    def __call__(self, s):
        return self.f(s)

    def node_index(self, s: float) -> int | None:
        """Index of a node equal to ``s`` (to rounding), if any."""
        i = int(np.searchsorted(self.nodes, s))
        for j in (i - 1, i):
            if 0 <= j < self.nodes.size and abs(self.nodes[j] - s) <= 1e-12 * max(1.0, abs(s)):
                return j
        return None

    def value_at(self, s: float) -> tuple[float, float]:
        """(f(s), f'(s)), exact at nodes."""
        j = self.node_index(s)
        if j is not None:
            return float(self.f_values[j]), float(self.fp_values[j])
        return self.f(s), self.fp(s)

    def restricted(self, interval: tuple[float, float]) -> "ScalarSolution":
        lo, hi = interval
        keep = (self.nodes >= lo - 1e-12) & (self.nodes <= hi + 1e-12)
        return ScalarSolution(self.nodes[keep], self.f_values[keep], self.fp_values[keep], self.kappa_values[keep])

    def scaled(self, factor: float) -> "ScalarSolution":
        return ScalarSolution(self.nodes, factor * self.f_values, factor * self.fp_values, self.kappa_values)

    def reflected(self) -> "ScalarSolution":
        """g(s) = f(-s), the matching solution for the reversed profile."""
        return ScalarSolution(-self.nodes[::-1], self.f_values[::-1].copy(), -self.fp_values[::-1], self.kappa_values[::-1].copy())

    def residual(self, profile: CurvatureProfile) -> float:
        """max |f'' + kappa f| / (1 + |f|) at node midpoints, f'' from the f' interpolant."""
        mid = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        fpp = self._fp.derivative()(mid)
        f = self._f(mid)
        return float(np.max(np.abs(fpp + profile.sample(mid) * f) / (1.0 + np.abs(f))))

    def to_frame(self, grid=None) -> pd.DataFrame:
        s = self.nodes if grid is None else np.asarray(grid, dtype=float)
        return pd.DataFrame({"s": s, "f": self.f(s), "fp": self.fp(s)})


def combine(solutions: Sequence[ScalarSolution], coefficients: Sequence[float]) -> ScalarSolution:
    """Linear combination of solutions sharing one node set."""
    base = solutions[0]
    for sol in solutions[1:]:
        if sol.nodes.shape != base.nodes.shape or np.any(sol.nodes != base.nodes):
            raise DomainError("solutions must share nodes to be combined")
    f = sum(c * sol.f_values for c, sol in zip(coefficients, solutions))
    fp = sum(c * sol.fp_values for c, sol in zip(coefficients, solutions))
    return ScalarSolution(base.nodes, f, fp, base.kappa_values)


# --- integration ------------------------------------------------------------


def _jacobi_rhs(kappa: Callable, count: int):
    def rhs(s, y):
        k = float(kappa(s))
        y = y.reshape(count, 2)
        return np.column_stack((y[:, 1], -k * y[:, 0])).ravel()

    return rhs


def _rk4_leg(rhs, s_from: float, s_to: float, y0: np.ndarray, step: float):
    n = max(1, math.ceil(abs(s_to - s_from) / step - 1e-9))
    ts = np.linspace(s_from, s_to, n + 1)
    ys = np.empty((n + 1, y0.size))
    ys[0] = y0
    for i in range(n):
        h = ts[i + 1] - ts[i]
        stages = []
        for a_row, c in zip(_RK4_A, _RK4_C):
            y_stage = ys[i] + h * sum(a * k for a, k in zip(a_row, stages))
            stages.append(np.asarray(rhs(ts[i] + c * h, y_stage)))
        ys[i + 1] = ys[i] + h * sum(b * k for b, k in zip(_RK4_B, stages))
    return ts, ys


def _leg(rhs, s_from: float, s_to: float, y0: np.ndarray, config: IntegratorConfig, max_step: float, t_eval=None):
    """Integrate one monotone leg; returns (nodes, states) with states[i] at nodes[i]."""
    if config.method == "RK4":
        if t_eval is None:
            return _rk4_leg(rhs, s_from, s_to, y0, min(config.fixed_step, max_step))
        ys, y, s = [], y0, s_from
        for target in t_eval:
            if target != s:
                _, path = _rk4_leg(rhs, s, target, y, config.fixed_step)
                y, s = path[-1], target
            ys.append(y)
        return np.asarray(t_eval, dtype=float), np.asarray(ys)

    sol = solve_ivp(
        rhs,
        (s_from, s_to),
        y0,
        method=config.method,
        rtol=config.rel_tol,
        atol=config.abs_tol,
        max_step=max_step,
        t_eval=t_eval,
    )
    if sol.status != 0:
        raise IntegrationError(f"integration failed: {sol.message}", last_good_interval=tuple(sorted((s_from, float(sol.t[-1])))))
    ts, ys = sol.t, sol.y.T
    if t_eval is not None:
        return ts, ys
    # a round-off sized last step leaves two nodes a sliver apart; keep the endpoint
    steps = np.abs(np.diff(ts))
    if steps.size > 1 and steps[-1] < NODE_MERGE_FRACTION * min(max_step, abs(s_to - s_from)):
        ts, ys = np.delete(ts, -2), np.delete(ys, -2, axis=0)
        steps = np.abs(np.diff(ts))
    if steps.size > 1 and steps[:-1].min() < config.min_step:
        raise IntegrationError("step-size underflow", last_good_interval=tuple(sorted((s_from, float(ts[-1])))))
    return ts, ys


def _check_interval(profile: CurvatureProfile, interval: tuple[float, float], s0: float) -> tuple[float, float]:
    lo, hi = map(float, interval)
    if not lo <= s0 <= hi:
        raise DomainError(f"s0={s0} outside target interval {interval}")
    if not profile.contains_interval((lo, hi)):
        raise DomainError(f"interval {interval} not inside profile domain {profile.domain}")
    if lo == hi:
        raise DomainError("target interval is empty")
    return lo, hi


def integrate_jacobi_system(
    profile: CurvatureProfile,
    s0: float,
    states: Sequence[tuple[float, float]],
    target_interval: tuple[float, float],
    config: IntegratorConfig = IntegratorConfig(),
    breakpoints: Sequence[float] = (),
) -> list[ScalarSolution]:
    """Several solutions of (J) on one shared node set.

    ``states`` holds (f(s0), f'(s0)) per solution. Every breakpoint inside the
    interval becomes an exact node.
    """
    lo, hi = _check_interval(profile, target_interval, s0)
    y0 = np.asarray(states, dtype=float).reshape(-1, 2)
    count = y0.shape[0]
    rhs = _jacobi_rhs(profile.kappa, count)

    legs = []
    for end in (lo, hi):
        if end == s0:
            continue
        stops = sorted({b for b in breakpoints if min(s0, end) < b < max(s0, end)} | {end}, key=lambda b: abs(b - s0))
        ts, ys, s, y = [np.array([s0])], [y0.ravel()[None, :]], s0, y0.ravel()
        for stop in stops:
            t_leg, y_leg = _leg(rhs, s, stop, y, config, config.max_step)
            ts.append(t_leg[1:])
            ys.append(y_leg[1:])
            s, y = stop, y_leg[-1]
        legs.append((np.concatenate(ts), np.concatenate(ys)))

    if len(legs) == 2:
        (t_back, y_back), (t_fwd, y_fwd) = legs
        nodes = np.concatenate((t_back[::-1], t_fwd[1:]))
        values = np.concatenate((y_back[::-1], y_fwd[1:]))
    else:
        nodes, values = legs[0]
        if nodes[0] > nodes[-1]:
            nodes, values = nodes[::-1], values[::-1]

    kappa_nodes = profile.sample(nodes)
    values = values.reshape(nodes.size, count, 2)
    return [ScalarSolution(nodes, values[:, i, 0].copy(), values[:, i, 1].copy(), kappa_nodes) for i in range(count)]


def integrate_jacobi(
    profile: CurvatureProfile,
    s0: float,
    f0: float,
    fp0: float,
    target_interval: tuple[float, float],
    config: IntegratorConfig = IntegratorConfig(),
) -> ScalarSolution:
    return integrate_jacobi_system(profile, s0, [(f0, fp0)], target_interval, config)[0]


def propagate_jacobi(
    profile: CurvatureProfile,
    s0: float,
    states: Sequence[tuple[float, float]],
    times: Sequence[float],
    config: IntegratorConfig = IntegratorConfig(),
) -> np.ndarray:
    """States of several solutions at ``times``; shape (len(times), count, 2).

    No dense output is kept, so step size is limited only by the tolerances.
    """
    requested = np.asarray(times, dtype=float)
    y0 = np.asarray(states, dtype=float).reshape(-1, 2)
    count = y0.shape[0]
    if requested.size == 0:
        return np.empty((0, count, 2))
    # solve_ivp needs strictly monotone t_eval
    times, inverse = np.unique(requested, return_inverse=True)
    out = np.empty((times.size, count, 2))
    for t in (times.min(), times.max()):
        if not profile.contains(t):
            raise DomainError(f"time {t} outside profile domain {profile.domain}")
    rhs = _jacobi_rhs(profile.kappa, count)

    at_start = times == s0
    out[at_start] = y0
    for mask in (times > s0, times < s0):
        if not mask.any():
            continue
        idx = np.flatnonzero(mask)
        order = idx[np.argsort(np.abs(times[idx] - s0))]
        t_eval = times[order]
        ts, ys = _leg(rhs, s0, float(t_eval[-1]), y0.ravel(), config, np.inf, t_eval=t_eval)
        out[order] = ys.reshape(-1, count, 2)
    return out[inverse.ravel()]


def propagate_with_zeros(
    profile: CurvatureProfile,
    s0: float,
    states: Sequence[tuple[float, float]],
    t: float,
    config: IntegratorConfig = IntegratorConfig(),
    watch: int = 0,
    samples_per_step: int = 4,
) -> tuple[np.ndarray, list[tuple[float, float]]]:
    """States at ``t``, shape (count, 2), and brackets of the zeros of solution ``watch`` after s0.

    The dense output is sampled at every step end and at ``samples_per_step``
    points inside each step, so a pair of zeros between s0 and t is seen
    even though the end states agree in sign. A zero at s0 itself is not
    reported.
    """
    y0 = np.asarray(states, dtype=float).reshape(-1, 2)
    count = y0.shape[0]
    if t == s0:
        return y0.copy(), []
    for x in (s0, t):
        if not profile.contains(x):
            raise DomainError(f"time {x} outside profile domain {profile.domain}")

    sol = solve_ivp(
        _jacobi_rhs(profile.kappa, count),
        (s0, t),
        y0.ravel(),
        method=config.adaptive_method,
        rtol=config.rel_tol,
        atol=config.abs_tol,
        dense_output=True,
    )
    if sol.status != 0:
        raise IntegrationError(f"integration failed: {sol.message}", last_good_interval=tuple(sorted((s0, float(sol.t[-1])))))

    steps = np.diff(sol.t)
    fractions = np.arange(samples_per_step) / samples_per_step
    checkpoints = np.append((sol.t[:-1, None] + steps[:, None] * fractions).ravel(), sol.t[-1])
    values = sol.sol(checkpoints)[2 * watch]

    def watched(u):
        return float(sol.sol(u)[2 * watch])

    brackets = []
    for i in range(checkpoints.size - 1):
        if values[i] != 0 and (values[i + 1] == 0 or np.sign(values[i]) != np.sign(values[i + 1])):
            lo, hi = sorted((float(checkpoints[i]), float(checkpoints[i + 1])))
            brackets.append(bracket_root(watched, lo, hi))
    return sol.y[:, -1].reshape(count, 2), brackets


def wronskian(f: ScalarSolution, g: ScalarSolution, s: float) -> float:
    """W(f, g)(s) = f'(s) g(s) - f(s) g'(s)."""
    if not (f.contains(s) and g.contains(s)):
        raise DomainError(f"s={s} not in both solution intervals {f.interval}, {g.interval}")
    f_val, fp_val = f.value_at(s)
    g_val, gp_val = g.value_at(s)
    return fp_val * g_val - f_val * gp_val


# --- zeros and poles --------------------------------------------------------


def bracket_root(fn: Callable[[float], float], lo: float, hi: float, width: float = 1e-8) -> tuple[float, float]:
    """A subinterval of [lo, hi] of width <= ``width`` across which fn changes sign."""
    f_lo, f_hi = fn(lo), fn(hi)
    if f_lo == 0:
        return lo, lo
    if f_hi == 0:
        return hi, hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise DomainError(f"no sign change on [{lo}, {hi}]")
    root = brentq(fn, lo, hi, xtol=width / 8)
    left, right = max(lo, root - width / 4), min(hi, root + width / 4)
    if np.sign(fn(left)) != np.sign(f_lo) or np.sign(fn(right)) != np.sign(f_hi):
        left, right = lo, hi
        while right - left > width:
            mid = 0.5 * (left + right)
            if np.sign(fn(mid)) == np.sign(f_lo):
                left = mid
            else:
                right = mid
    return float(left), float(right)


def sign_changes(solution: ScalarSolution, interval: tuple[float, float] | None = None, exclude: float | None = None) -> list[tuple[float, float]]:
    """Node pairs across which f changes sign (or hits zero), skipping the node at ``exclude``."""
    sol = solution if interval is None else solution.restricted(interval)
    s, f = sol.nodes, sol.f_values
    keep = np.ones(s.size, dtype=bool)
    if exclude is not None:
        keep &= np.abs(s - exclude) > 1e-12 * max(1.0, abs(exclude))
    pairs = []
    idx = np.flatnonzero(keep)
    for i, j in zip(idx[:-1], idx[1:]):
        if exclude is not None and s[i] < exclude < s[j]:
            continue
        if f[j] == 0 or np.sign(f[i]) != np.sign(f[j]):
            pairs.append((float(s[i]), float(s[j])))
    return pairs


@dataclass(frozen=True)
class BlowUp:
    location: float
    bracket: tuple[float, float]
    direction: Literal["downward", "upward"]

    def to_dict(self) -> dict:
        return {"location": self.location, "bracket": list(self.bracket), "direction": self.direction}


@dataclass(frozen=True)
class RiccatiSolution:
    """u(s) on ``interval``, finite there; ``blow_up`` marks where |u| escaped."""

    interval: tuple[float, float]
    evaluate: Callable = field(repr=False)
    blow_up: BlowUp | None = None

    def u(self, s):
        lo, hi = self.interval
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr < lo - 1e-12) or np.any(s_arr > hi + 1e-12):
            raise DomainError(f"s outside Riccati interval {self.interval}")
        out = np.asarray(self.evaluate(np.clip(s_arr, lo, hi)), dtype=float)
        return float(out) if out.ndim == 0 else out

    def __call__(self, s):
        return self.u(s)

    def to_frame(self, grid) -> pd.DataFrame:
        grid = np.asarray(grid, dtype=float)
        return pd.DataFrame({"s": grid, "u": self.u(grid)})


def _dense_scalar(sol) -> Callable:
    return lambda s: sol(s)[0]


def integrate_riccati(
    profile: CurvatureProfile,
    s0: float,
    u0: float,
    target_interval: tuple[float, float],
    cap: float = 1e6,
    config: IntegratorConfig = IntegratorConfig(),
) -> RiccatiSolution:
    """Integrate u' = -u^2 - kappa from an endpoint ``s0`` of the interval.

    When |u| reaches ``cap`` the reciprocal v = 1/u, which solves
    v' = 1 + kappa v^2 and stays regular through the pole, is integrated
    until it vanishes; the pole is bracketed to width <= 1e-8.
    """
    if not cap > 0:
        raise DomainError(f"cap must be positive, got {cap}")
    lo, hi = _check_interval(profile, target_interval, s0)
    if s0 not in (lo, hi):
        raise DomainError("integrate_riccati starts from an endpoint of the target interval")
    end = hi if s0 == lo else lo
    kappa = profile.kappa
    method = config.adaptive_method

    def rhs(s, y):
        return [-y[0] * y[0] - float(kappa(s))]

    def escape(s, y):
        return abs(y[0]) - cap

    escape.terminal = True

    sol = solve_ivp(rhs, (s0, end), [float(u0)], method=method, rtol=config.rel_tol, atol=config.abs_tol, events=escape, dense_output=True)
    if sol.status == -1:
        raise IntegrationError(f"Riccati integration failed: {sol.message}", last_good_interval=tuple(sorted((s0, float(sol.t[-1])))))
    s_stop = float(sol.t[-1])
    interval = (min(s0, s_stop), max(s0, s_stop))
    if sol.status == 0:
        return RiccatiSolution(interval=interval, evaluate=_dense_scalar(sol.sol))

    u_escape = float(sol.y[0, -1])
    direction = "downward" if u_escape < 0 else "upward"

    def reciprocal_rhs(s, y):
        return [1.0 + float(kappa(s)) * y[0] * y[0]]

    def pole(s, y):
        return y[0]

    pole.terminal = True

    recip = solve_ivp(
        reciprocal_rhs, (s_stop, end), [1.0 / u_escape], method=method, rtol=config.rel_tol, atol=config.abs_tol, events=pole, dense_output=True
    )
    if recip.status != 1:
        logger.warning(f"|u| reached cap {cap:g} at s={s_stop:.6g} but no pole was found before s={end:g}")
        return RiccatiSolution(interval=interval, evaluate=_dense_scalar(sol.sol))

    location = float(recip.t_events[0][0])
    v = _dense_scalar(recip.sol)
    # v crosses zero with slope 1; the interpolant extends slightly past the event
    lo_b, hi_b = location - 1e-6, location + 1e-6
    if np.sign(v(lo_b)) != np.sign(v(hi_b)):
        bracket = bracket_root(v, lo_b, hi_b, width=1e-8)
    else:
        bracket = (location, location)
    logger.info(f"Riccati pole near s={location:.10g} ({direction})")
    return RiccatiSolution(interval=interval, evaluate=_dense_scalar(sol.sol), blow_up=BlowUp(location, bracket, direction))

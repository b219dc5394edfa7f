"""Anosov conditions on sampled geodesics and the contraction rate estimate.

A perpendicular tangent vector xi at v is stored through the Jacobi field
it generates: (w0, w1) = (J(0), J'(0)); its Sasaki norm is sqrt(w0^2 + w1^2)
and the flow acts on it by integrating f'' + kappa f = 0.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
import pandas as pd

from jacobi_anosov.config import settings
from jacobi_anosov.config.logging import get_logger
from jacobi_anosov.config_model import IntegratorConfig, RunConfig
from jacobi_anosov.curvature_models import (
    ConformalChart,
    CurvatureProfile,
    clip_window,
    geodesic_profile,
    sample_unit_tangents,
    unit_tangent,
)
from jacobi_anosov.errors import ConjugatePointError, ConvergenceError, DataError, DomainError
from jacobi_anosov.jacobi_fields import StableData, conjugate_points, focal_monotonicity, solve_a, stable_data
from jacobi_anosov.ode_core import ScalarSolution, propagate_jacobi
from jacobi_anosov.riccati_analysis import grid

logger = get_logger(__name__)

EVIDENCE = "sampled evidence"
CONTRACTION_TOL = 1e-6


@dataclass(frozen=True)
class TangentVector:
    w0: float
    w1: float
    base: str = ""

    @property
    def sasaki_norm(self) -> float:
        return math.hypot(self.w0, self.w1)

    def normalized(self) -> "TangentVector":
        norm = self.sasaki_norm
        if norm == 0:
            raise DomainError("cannot normalize the zero vector")
        return TangentVector(self.w0 / norm, self.w1 / norm, self.base)

    def to_dict(self) -> dict:
        return {"w0": self.w0, "w1": self.w1}


def flow_pushforward(
    profile: CurvatureProfile,
    v: TangentVector,
    t: float,
    config: IntegratorConfig = IntegratorConfig(),
) -> TangentVector:
    """(J(t), J'(t)) for the Jacobi field with (J(0), J'(0)) = (w0, w1)."""
    if v.w0 == 0 and v.w1 == 0:
        return TangentVector(0.0, 0.0, v.base)
    state = propagate_jacobi(profile, 0.0, [(v.w0, v.w1)], [t], config)[0, 0]
    return TangentVector(float(state[0]), float(state[1]), v.base)


def pushforward_path(
    profile: CurvatureProfile,
    v: TangentVector,
    times: Sequence[float],
    config: IntegratorConfig = IntegratorConfig(),
) -> np.ndarray:
    """(J, J') at every time from a single integration; shape (len(times), 2)."""
    return propagate_jacobi(profile, 0.0, [(v.w0, v.w1)], times, config)[:, 0, :]


def stable_vector(stable: StableData) -> TangentVector:
    return TangentVector(1.0, stable.d_slope, "stable").normalized()


def unstable_vector(stable: StableData) -> TangentVector:
    return TangentVector(1.0, stable.dbar_slope, "unstable").normalized()


def transversality_gap(stable: StableData) -> float:
    """dbar'(0) - d'(0); positive iff the stable and unstable spans meet only in 0."""
    return stable.gap


# --- per-geodesic detectors -------------------------------------------------


@dataclass(frozen=True)
class BoundedField:
    found: bool
    witness: TangentVector | None
    sup_abs_d: float


def bounded_field_detector(
    stable: StableData,
    window: tuple[float, float],
    bound_cap: float = 1e6,
    gap_tol: float = 1e-6,
) -> BoundedField:
    """A two-sided bounded Jacobi field exists iff d and dbar are proportional.

    d itself is the witness: found iff the gap is within ``gap_tol`` and
    sup |d| over the window stays below ``bound_cap``.
    """
    lo, hi = max(window[0], stable.window[0]), min(window[1], stable.window[1])
    sup = float(np.max(np.abs(stable.d.restricted((lo, hi)).f_values)))
    found = transversality_gap(stable) <= gap_tol and sup <= bound_cap
    witness = TangentVector(1.0, stable.d_slope, "bounded") if found else None
    return BoundedField(found=found, witness=witness, sup_abs_d=sup)


@dataclass(frozen=True)
class ParallelField:
    found: bool
    max_abs_kappa: float
    tolerance_sensitive: bool


def parallel_field_detector(
    profile: CurvatureProfile,
    window: tuple[float, float],
    kappa_tol: float = 1e-9,
    grid_step: float = 1e-2,
) -> ParallelField:
    """A nonzero constant solution of (J) exists iff kappa vanishes along the window."""
    s = grid(clip_window(profile.domain, window), grid_step)
    peak = float(np.max(np.abs(profile.sample(s))))
    found = peak <= kappa_tol
    sensitive = found and peak > 0
    if sensitive:
        logger.warning(f"Parallel field accepted with max |kappa| = {peak:.3e} > 0; the result depends on kappa_tol")
    return ParallelField(found=found, max_abs_kappa=peak, tolerance_sensitive=sensitive)


@dataclass(frozen=True)
class NegativePassage:
    passes: bool
    witness_s: float | None
    min_kappa: float


def negative_curvature_passage(
    profile: CurvatureProfile,
    window: tuple[float, float],
    kappa_tol: float = 1e-9,
    grid_step: float = 1e-2,
) -> NegativePassage:
    s = grid(clip_window(profile.domain, window), grid_step)
    values = profile.sample(s)
    i = int(np.argmin(values))
    passes = bool(values[i] < -kappa_tol)
    return NegativePassage(passes=passes, witness_s=float(s[i]) if passes else None, min_kappa=float(values[i]))


def contraction_constant(a_solutions: Sequence[ScalarSolution], focal_ok: bool) -> float:
    """min over t >= s >= 1 of |a(t)|/|a(s)|; exactly 1 when |a| is monotone."""
    if focal_ok:
        return 1.0
    ratios = []
    for a in a_solutions:
        keep = a.nodes >= 1.0
        values = np.abs(a.f_values[keep])
        if values.size == 0:
            continue
        suffix_min = np.minimum.accumulate(values[::-1])[::-1]
        ratios.append(float(np.min(suffix_min / values)))
    if not ratios:
        raise DataError("no geodesic reaches s = 1; contraction constant undefined")
    return min(ratios)


def expansion_bound(A: float, k: float) -> float:
    """B = [(1 + k^2) / A^2]^(1/2)."""
    if not A > 0:
        raise DataError(f"contraction constant must be positive, got {A}")
    return math.sqrt((1.0 + k * k) / (A * A))


# --- rates ------------------------------------------------------------------


def phi_estimate(
    profiles: Sequence[CurvatureProfile],
    stables: Sequence[StableData],
    s_grid: Sequence[float],
    config: IntegratorConfig = IntegratorConfig(),
    offsets: Sequence[float] = (0.0,),
    direction: Literal["stable", "unstable"] = "stable",
) -> pd.DataFrame:
    """phi(s): the largest Sasaki-norm ratio over sampled geodesics and base offsets.

    For the stable direction the unit stable vector at the flow image g^tau v
    is pushed forward by s; for the unstable direction the unit unstable
    vector is pushed backward.
    """
    if not stables:
        raise DataError("no stable data to estimate phi from")
    s_grid = np.asarray(s_grid, dtype=float)
    phi = np.full(s_grid.size, np.nan)
    sign = 1.0 if direction == "stable" else -1.0
    for profile, stable in zip(profiles, stables):
        v = stable_vector(stable) if direction == "stable" else unstable_vector(stable)
        for tau in offsets:
            times = sign * (tau + s_grid)
            reach = np.array([profile.contains(t) for t in times])
            if not profile.contains(sign * tau) or not reach.any():
                continue
            path = pushforward_path(profile, v, np.concatenate(([sign * tau], times[reach])), config)
            norms = np.hypot(path[:, 0], path[:, 1])
            ratio = norms[1:] / norms[0]
            phi[reach] = np.fmax(phi[reach], ratio)
    covered = ~np.isnan(phi)
    if not covered.all():
        logger.warning(f"{int((~covered).sum())} phi grid points lie beyond every sampled geodesic")
    return pd.DataFrame({"s": s_grid[covered], "phi": phi[covered]})


@dataclass(frozen=True)
class RateEstimate:
    a_const: float
    c_const: float
    fit_window: tuple[float, float]
    fit_residual: float
    phi_samples: list[tuple[float, float]] = field(repr=False)
    submultiplicative: bool = True
    worst_slack: float = 0.0
    halving_s0: float | None = None
    halving_c: float | None = None
    halving_a: float | None = None
    contraction_time: float | None = None
    direction: str = "stable"
    fit_slack: float = 0.0

    @property
    def contracting(self) -> bool:
        return self.c_const > CONTRACTION_TOL

    def bound(self, s):
        """a e^{-c s}, without the fit slack."""
        return self.a_const * np.exp(-self.c_const * np.asarray(s, dtype=float))

    def within_bound(self, s, phi) -> bool:
        """phi <= a e^{-c s} (1 + fit_slack) at every sample."""
        limit = self.bound(s) * (1.0 + self.fit_slack)
        return bool(np.all(np.asarray(phi, dtype=float) <= limit * (1.0 + 1e-9)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fit_window"] = list(self.fit_window)
        d["phi_samples"] = [[s, p] for s, p in self.phi_samples]
        d["contracting"] = self.contracting
        return d


def _samples(phi_samples) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(phi_samples, pd.DataFrame):
        return phi_samples["s"].to_numpy(dtype=float), phi_samples["phi"].to_numpy(dtype=float)
    arr = np.asarray(list(phi_samples), dtype=float).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def contraction_time(phi_samples, eps: float) -> float | None:
    """Smallest grid T with phi(s) <= eps for every grid s >= T."""
    s, phi = _samples(phi_samples)
    above = np.flatnonzero(phi > eps)
    if above.size == 0:
        return float(s[0])
    if above[-1] == s.size - 1:
        return None
    return float(s[above[-1] + 1])


def submultiplicativity_audit(phi_samples, tol: float = 1e-6) -> tuple[bool, float]:
    """Worst phi(s+t) - phi(s) phi(t) over grid pairs whose sum is on the grid."""
    s, phi = _samples(phi_samples)
    lookup = {round(x, 9): p for x, p in zip(s, phi)}
    worst = -math.inf
    for i in range(s.size):
        for j in range(i, s.size):
            total = lookup.get(round(s[i] + s[j], 9))
            if total is not None:
                worst = max(worst, total - phi[i] * phi[j])
    if worst == -math.inf:
        return True, 0.0
    ok = bool(worst <= tol)
    if not ok:
        logger.warning(f"phi(s+t) <= phi(s) phi(t) fails by {worst:.3e}")
    return ok, float(worst)


def fit_rates(
    phi_samples,
    fit_window: tuple[float, float] = (1.0, 8.0),
    audit_tol: float = 1e-6,
    contraction_eps: float = 0.5,
    direction: str = "stable",
) -> RateEstimate:
    """Least-squares line through (s, log phi) on the fit window: phi ~ a e^{-c s}."""
    s, phi = _samples(phi_samples)
    if np.any(~np.isfinite(phi)) or np.any(phi <= 0):
        raise DataError("phi samples must be positive and finite")
    in_window = (s >= fit_window[0] - 1e-12) & (s <= fit_window[1] + 1e-12)
    if in_window.sum() < 4:
        raise DataError(f"need at least 4 phi samples in the fit window {list(fit_window)}, got {int(in_window.sum())}")

    log_phi = np.log(phi[in_window])
    slope, intercept = np.polyfit(s[in_window], log_phi, 1)
    residual = float(np.max(np.abs(log_phi - (slope * s[in_window] + intercept))))
    ok, slack = submultiplicativity_audit(phi_samples, audit_tol)

    # Past s0 with phi < 1/2, submultiplicativity gives phi(s) <= e^{-cs}, c = log 2 / (2 s0)
    halving_s0 = halving_c = halving_a = None
    positive = s > 0
    at_least_half = np.flatnonzero(positive & (phi >= 0.5))
    candidates = np.flatnonzero(positive)
    if candidates.size:
        start = candidates[0] if at_least_half.size == 0 else at_least_half[-1] + 1
        if start < s.size:
            halving_s0 = float(s[start])
            halving_c = math.log(2.0) / (2.0 * halving_s0)
            head = s <= halving_s0
            halving_a = float(max(1.0, np.max(phi[head] * np.exp(halving_c * s[head]))))

    estimate = RateEstimate(
        a_const=float(math.exp(intercept)),
        c_const=float(-slope),
        fit_window=(float(fit_window[0]), float(fit_window[1])),
        fit_residual=residual,
        phi_samples=[(float(a), float(b)) for a, b in zip(s, phi)],
        submultiplicative=ok,
        worst_slack=slack,
        halving_s0=halving_s0,
        halving_c=halving_c,
        halving_a=halving_a,
        contraction_time=contraction_time(phi_samples, contraction_eps),
        direction=direction,
    )
    # smallest slack with phi <= a e^{-cs} (1 + slack) across the fit window
    excess = phi[in_window] / estimate.bound(s[in_window])
    estimate = replace(estimate, fit_slack=float(max(0.0, excess.max() - 1.0)))
    logger.info(f"Fitted {direction} rate: a={estimate.a_const:.6g}, c={estimate.c_const:.6g}, residual={residual:.3e}")
    return estimate


# --- families and the aggregate check ---------------------------------------


@dataclass(frozen=True)
class GeodesicSample:
    geodesic_id: int
    profile: CurvatureProfile
    label: dict = field(default_factory=dict)


def family_from_profile(
    profile: CurvatureProfile,
    count: int,
    seed: int,
    shift_range: tuple[float, float] = (-10.0, 10.0),
    extras: Sequence[float] = (),
) -> list[GeodesicSample]:
    """Seeded shifts kappa(s + tau) of one profile, extras appended in order."""
    if count < 1:
        raise DomainError(f"count must be at least 1, got {count}")
    rng = np.random.default_rng(seed)
    shifts = [float(t) for t in rng.uniform(shift_range[0], shift_range[1], size=count)] + [float(t) for t in extras]
    return [GeodesicSample(i, profile.shifted(tau), {"shift": tau}) for i, tau in enumerate(shifts)]


def family_from_chart(
    chart: ConformalChart,
    count: int,
    seed: int,
    horizon: float,
    config: IntegratorConfig = IntegratorConfig(),
    extras: Sequence[Sequence[float]] = (),
) -> list[GeodesicSample]:
    """Whole geodesics through seeded unit tangents, extras [x, y, angle] appended."""
    tangents = list(sample_unit_tangents(chart, count, seed))
    for x, y, angle in extras:
        tangents.append(((x, y), unit_tangent(chart, (x, y), angle)))
    samples = []
    for i, (point, tangent) in enumerate(tangents):
        profile = geodesic_profile(chart, point, tangent, horizon, config)
        samples.append(GeodesicSample(i, profile, {"point": list(point), "tangent": list(tangent)}))
    return samples


def _mark(ok: bool) -> str:
    return "pass" if ok else "fail"


@dataclass(frozen=True)
class GeodesicRecord:
    geodesic_id: int
    label: dict
    gap: float
    d_slope: float
    dbar_slope: float
    residual: float
    bounded_field_found: bool
    parallel_field_found: bool
    parallel_tolerance_sensitive: bool
    negative_curvature: bool
    min_kappa: float
    witness_s: float | None
    focal_ok: bool
    focal_first_failure: float | None
    conditions: dict
    passed: bool
    window: tuple[float, float]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        d["verdict"] = "anosov" if d.pop("passed") else "not-anosov"
        return d


def evaluate_geodesic(
    sample: GeodesicSample,
    config: RunConfig,
    integrator: IntegratorConfig,
) -> tuple[GeodesicRecord, StableData, ScalarSolution]:
    check = config.check
    profile = sample.profile
    window = clip_window(profile.domain, tuple(config.window))

    a = solve_a(profile, window, integrator)
    conj = conjugate_points(profile, window, integrator, a=a)
    if not conj.ok:
        raise ConjugatePointError(
            f"geodesic {sample.geodesic_id} has conjugate points", brackets=conj.zeros, geodesic_id=sample.geodesic_id
        )
    focal = focal_monotonicity(profile, window, integrator, a=a)
    try:
        stable = stable_data(profile, window, config.limit, integrator)
    except ConjugatePointError as e:
        # zeros of a beyond the window, met while building the limits
        raise ConjugatePointError(
            f"geodesic {sample.geodesic_id}: {e.message}", brackets=e.brackets, geodesic_id=sample.geodesic_id
        ) from e

    gap = transversality_gap(stable)
    bounded = bounded_field_detector(stable, window, check.bound_cap, check.gap_tol)
    parallel = parallel_field_detector(profile, window, check.kappa_tol, check.grid_step)
    negative = negative_curvature_passage(profile, window, check.kappa_tol, check.grid_step)
    conditions = {
        "2": _mark(gap > check.gap_tol),
        "3": "implied-by-2",
        "4": _mark(not bounded.found),
        "5": _mark(not parallel.found),
        "6": _mark(negative.passes),
    }
    passed = all(conditions[c] == "pass" for c in ("2", "4", "5", "6"))
    record = GeodesicRecord(
        geodesic_id=sample.geodesic_id,
        label=sample.label,
        gap=gap,
        d_slope=stable.d_slope,
        dbar_slope=stable.dbar_slope,
        residual=stable.residual,
        bounded_field_found=bounded.found,
        parallel_field_found=parallel.found,
        parallel_tolerance_sensitive=parallel.tolerance_sensitive,
        negative_curvature=negative.passes,
        min_kappa=negative.min_kappa,
        witness_s=negative.witness_s,
        focal_ok=focal.ok,
        focal_first_failure=focal.first_failure,
        conditions=conditions,
        passed=passed,
        window=tuple(window),
    )
    return record, stable, a


@dataclass(frozen=True)
class AnosovReport:
    verdict: Literal["anosov", "not-anosov", "inconclusive"]
    geodesics: list[GeodesicRecord]
    requested: int
    skipped: list[int]
    assumptions: dict
    focal_equivalences_asserted: bool
    stable_rate: RateEstimate | None
    unstable_rate: RateEstimate | None
    contraction_constant: float | None
    expansion_bound: float | None
    phi_within_expansion_bound: bool | None
    seeds: dict

    @property
    def min_gap(self) -> float:
        return min(r.gap for r in self.geodesics)

    @property
    def is_anosov(self) -> bool:
        return self.verdict == "anosov"

    def condition_summary(self) -> dict:
        summary = {c: _mark(all(r.conditions[c] == "pass" for r in self.geodesics)) for c in ("2", "4", "5", "6")}
        summary["3"] = "implied-by-2"
        return dict(sorted(summary.items()))

    def to_dict(self) -> dict:
        return {
            "schema_version": settings.SCHEMA_VERSION,
            "evidence": EVIDENCE,
            "verdict": self.verdict,
            "conditions": self.condition_summary(),
            "coverage": {
                "requested": self.requested,
                "evaluated": len(self.geodesics),
                "skipped": list(self.skipped),
            },
            "seeds": self.seeds,
            "assumptions": self.assumptions,
            "focal_equivalences_asserted": self.focal_equivalences_asserted,
            "min_gap": self.min_gap,
            "stable_rate": self.stable_rate.to_dict() if self.stable_rate else None,
            "unstable_rate": self.unstable_rate.to_dict() if self.unstable_rate else None,
            "contraction_constant": self.contraction_constant,
            "expansion_bound": self.expansion_bound,
            "phi_within_expansion_bound": self.phi_within_expansion_bound,
            "geodesics": [r.to_dict() for r in self.geodesics],
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "geodesic_id": [r.geodesic_id for r in self.geodesics],
                "gap": [r.gap for r in self.geodesics],
                "min_kappa": [r.min_kappa for r in self.geodesics],
                "bounded": [r.bounded_field_found for r in self.geodesics],
                "parallel": [r.parallel_field_found for r in self.geodesics],
                "verdict": ["anosov" if r.passed else "not-anosov" for r in self.geodesics],
            }
        )


def _try_fit(phi: pd.DataFrame, check, direction: str) -> RateEstimate | None:
    try:
        return fit_rates(phi, tuple(check.fit_window), check.audit_tol, check.contraction_eps, direction)
    except DataError as e:
        logger.warning(f"No {direction} rate estimate: {e.message}")
        return None


def check_anosov(family: Sequence[GeodesicSample], config: RunConfig, seeds: dict | None = None) -> AnosovReport:
    """Evaluate the Anosov conditions on every sampled geodesic, in sample order.

    Geodesics whose stable limit does not converge are skipped with a
    warning, and the verdict is then at best "inconclusive". A conjugate
    point on any geodesic aborts the check.
    """
    if not family:
        raise DomainError("empty geodesic family")
    check = config.check
    integrator = replace(config.integrator, max_step=check.max_step)

    records, stables, profiles, a_solutions, skipped = [], [], [], [], []
    for sample in family:
        logger.info(f"Evaluating geodesic {sample.geodesic_id}...")
        try:
            record, stable, a = evaluate_geodesic(sample, config, integrator)
        except ConvergenceError as e:
            logger.warning(f"Skipping geodesic {sample.geodesic_id}: {e.message}")
            skipped.append(sample.geodesic_id)
            continue
        records.append(record)
        stables.append(stable)
        profiles.append(sample.profile)
        a_solutions.append(a)
    if not records:
        raise ConvergenceError("stable limits failed on every sampled geodesic", residual=math.inf, horizon=config.limit.max_horizon)

    focal_all = all(r.focal_ok for r in records)
    asserted = config.assumptions.no_focal_points
    no_focal = focal_all if asserted is None else asserted

    s_grid = np.arange(0.0, check.fit_window[1] + 0.5 * check.phi_step, check.phi_step)
    stable_phi = phi_estimate(profiles, stables, s_grid, integrator, check.base_offsets, "stable")
    unstable_phi = phi_estimate(profiles, stables, s_grid, integrator, check.base_offsets, "unstable")
    stable_rate = _try_fit(stable_phi, check, "stable")
    unstable_rate = _try_fit(unstable_phi, check, "unstable")

    A = B = within = None
    try:
        A = contraction_constant(a_solutions, focal_all)
        B = expansion_bound(A, max(p.lower_bound_k for p in profiles))
        within = bool(stable_phi["phi"].max() <= B * (1 + 1e-9)) if len(stable_phi) else None
    except DataError as e:
        logger.warning(f"No contraction constant: {e.message}")

    if not all(r.passed for r in records):
        verdict = "not-anosov"
    elif skipped:
        # the skipped geodesics could still fail
        verdict = "inconclusive"
    else:
        verdict = "anosov"
    logger.info(f"Verdict: {verdict} ({EVIDENCE}, {len(records)} of {len(family)} geodesics evaluated)")
    return AnosovReport(
        verdict=verdict,
        geodesics=records,
        requested=len(family),
        skipped=skipped,
        assumptions={
            **asdict(config.assumptions),
            "no_focal_points": no_focal,
            "no_focal_points_source": "inferred" if asserted is None else "asserted",
        },
        focal_equivalences_asserted=bool(no_focal),
        stable_rate=stable_rate,
        unstable_rate=unstable_rate,
        contraction_constant=A,
        expansion_bound=B,
        phi_within_expansion_bound=within,
        seeds=seeds or {"seed": config.seed},
    )

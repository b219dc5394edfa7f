from dataclasses import replace
from pathlib import Path

import pandas as pd

from jacobi_anosov.anosov_checker import EVIDENCE, check_anosov, family_from_chart, family_from_profile
from jacobi_anosov.config import settings
from jacobi_anosov.config.logging import get_logger
from jacobi_anosov.curvature_models import ConformalChart, build_surface, clip_window, geodesic_profile, geodesic_trace, unit_tangent
from jacobi_anosov.errors import (
    EXIT_ANOSOV,
    EXIT_CONVERGENCE,
    EXIT_NOT_ANOSOV,
    ConfigError,
    ConjugatePointError,
    DataError,
    DomainError,
)
from jacobi_anosov.jacobi_fields import conjugate_points, focal_monotonicity, jacobi_frame, solve_a, stable_data
from jacobi_anosov.riccati_analysis import (
    grid,
    growth_threshold,
    norm_derivative_bound,
    riccati_envelope_frame,
    riccati_from_jacobi,
    stable_slope_bound,
    tail_mass,
    verify_coth_bound,
    verify_green_bound,
)

logger = get_logger(__name__)

VERDICT_EXIT_CODES = {
    "anosov": EXIT_ANOSOV,
    "not-anosov": EXIT_NOT_ANOSOV,
    "inconclusive": EXIT_CONVERGENCE,
}


def ensure_directories(directories):
    """
    Ensure that the specified directories exist.
    Paths are resolved relative to the current working directory.
    """
    try:
        for d in directories:
            path = Path(d).resolve()
            path.mkdir(parents=True, exist_ok=True)
            logger.info(f"Directory exists or created: {path}")
        logger.info("All folder structures validated.")
    except OSError as e:
        raise ConfigError(f"Error creating directories: {e}") from None


def prepare_output(context):
    out_dir = Path(context["config"].output.out_dir)
    ensure_directories([out_dir])
    context["out_dir"] = out_dir.resolve()
    context.setdefault("csv", {})
    context.setdefault("json", {})
    context.setdefault("exit_code", 0)
    return context


def load_surface(context):
    context["surface"] = build_surface(context["config"].surface)
    return context


def resolve_profile(context):
    """Curvature profile the single-geodesic commands work on.

    A conformal chart contributes the geodesic through trace.point in the
    direction trace.angle.
    """
    cfg = context["config"]
    surface = context["surface"]
    if isinstance(surface, ConformalChart):
        point = tuple(cfg.trace.point)
        tangent = unit_tangent(surface, point, cfg.trace.angle)
        profile = geodesic_profile(surface, point, tangent, cfg.trace.horizon, cfg.integrator)
    else:
        profile = surface
    window = clip_window(profile.domain, tuple(cfg.window))
    if not window[0] <= 0 <= window[1]:
        raise DomainError(f"window {cfg.window} and profile domain {profile.domain} do not overlap around 0")
    context["profile"] = profile
    context["window"] = window
    return context


def compute_a(context):
    context["a"] = solve_a(context["profile"], context["window"], context["config"].integrator)
    return context


def require_no_conjugate_points(context):
    profile, window, integrator = context["profile"], context["window"], context["config"].integrator
    report = conjugate_points(profile, window, integrator, a=context["a"])
    if not report.ok:
        raise ConjugatePointError("conjugate points of s=0 on the window; the stable construction needs none", brackets=report.zeros)
    context["conjugate"] = report
    context["focal"] = focal_monotonicity(profile, window, integrator, a=context["a"])
    return context


def compute_stable_data(context):
    cfg = context["config"]
    context["stable"] = stable_data(context["profile"], context["window"], cfg.limit, cfg.integrator)
    return context


def _stable_payload(context) -> dict:
    return {
        "schema_version": settings.SCHEMA_VERSION,
        "profile": context["profile"].description,
        **context["stable"].to_dict(),
        "conjugate_points": context["conjugate"].to_dict(),
        "focal_monotonicity": context["focal"].to_dict(),
    }


def collect_jacobi_tables(context):
    s = grid(context["window"], context["config"].output.grid_step)
    context["csv"][settings.JACOBI_CSV] = jacobi_frame(context["a"], context["stable"], s)
    context["json"][settings.STABLE_JSON] = _stable_payload(context)
    return context


def collect_stable_tables(context):
    stable = context["stable"]
    s = grid(context["window"], context["config"].output.grid_step)
    context["csv"][settings.STABLE_CSV] = stable.to_frame(s)
    context["csv"][settings.HORIZONS_CSV] = stable.history_frame()
    context["json"][settings.STABLE_JSON] = _stable_payload(context)
    return context


def _bound_k(context) -> float:
    k = context["config"].riccati.k
    return context["profile"].lower_bound_k if k is None else float(k)


def _positive_interval(context) -> tuple[float, float]:
    start, hi = context["config"].riccati.start, context["window"][1]
    if not hi > start:
        raise DomainError(f"window end {hi} is not beyond riccati.start = {start}")
    return start, hi


def collect_riccati_table(context):
    """u = a'/a against the coth envelope on [riccati.start, window end]."""
    cfg = context["config"]
    k = _bound_k(context)
    interval = _positive_interval(context)
    u = riccati_from_jacobi(context["a"], interval)
    report = verify_coth_bound(u, k, interval, cfg.riccati.grid_step, cfg.riccati.bound_tol)
    context["csv"][settings.RICCATI_CSV] = riccati_envelope_frame(u, k, interval, cfg.output.grid_step)
    context["json"][settings.BOUND_JSON] = {"schema_version": settings.SCHEMA_VERSION, "k": k, **report.to_dict()}
    return context


def collect_bound_reports(context):
    cfg = context["config"]
    rc = cfg.riccati
    profile, window, stable, a = context["profile"], context["window"], context["stable"], context["a"]
    k = _bound_k(context)
    interval = _positive_interval(context)

    reports = {
        "green_stable": verify_green_bound(riccati_from_jacobi(stable.d, stable.window), k, stable.window, rc.grid_step, rc.bound_tol),
        "green_unstable": verify_green_bound(
            riccati_from_jacobi(stable.dbar, stable.window), k, stable.window, rc.grid_step, rc.bound_tol
        ),
        "coth": verify_coth_bound(riccati_from_jacobi(a, interval), k, interval, rc.grid_step, rc.bound_tol),
        "norm_derivative": norm_derivative_bound(profile, window, k, cfg.integrator, rc.start, rc.grid_step, rc.bound_tol, a=a),
        "stable_slope": stable_slope_bound(stable, k, window, rc.grid_step, rc.bound_tol),
    }
    threshold = growth_threshold(profile, rc.growth_radius, window, k, cfg.limit, cfg.integrator, rc.grid_step)
    tails = [{"s": float(s), "m": tail_mass(profile, s, cfg.limit, cfg.integrator, slope=stable.d_slope)} for s in rc.tail_points]

    context["json"][settings.BOUNDS_JSON] = {
        "schema_version": settings.SCHEMA_VERSION,
        "k": k,
        "window": list(window),
        "all_pass": all(r.passed for r in reports.values()),
        "reports": {name: r.to_dict() for name, r in reports.items()},
        "growth_threshold": threshold.to_dict(),
        "tail_mass": tails,
    }
    return context


def build_family(context):
    """Seeded geodesic family: tangents of a chart, or shifts of a profile."""
    cfg = context["config"]
    check = cfg.check
    surface = context["surface"]
    if isinstance(surface, ConformalChart):
        integrator = replace(cfg.integrator, max_step=check.max_step)
        family = family_from_chart(surface, check.samples, cfg.seed, check.horizon, integrator, check.extra_tangents)
    else:
        family = family_from_profile(surface, check.samples, cfg.seed, tuple(check.shift_range), check.extra_shifts)
    logger.info(f"Sampled {len(family)} geodesics with seed {cfg.seed}")
    context["family"] = family
    return context


def run_check(context):
    context["report"] = check_anosov(context["family"], context["config"], seeds={"seed": context["config"].seed})
    return context


def collect_anosov_report(context):
    report = context["report"]
    context["json"][settings.REPORT_JSON] = report.to_dict()
    context["csv"][settings.GEODESICS_CSV] = report.to_frame()
    context["exit_code"] = VERDICT_EXIT_CODES[report.verdict]
    return context


def collect_rates(context):
    report = context["report"]
    if report.stable_rate is None:
        raise DataError("no stable rate estimate could be fitted")
    phi = report.stable_rate.phi_samples
    context["csv"][settings.PHI_CSV] = pd.DataFrame(phi, columns=["s", "phi"])
    context["json"][settings.RATES_JSON] = {
        "schema_version": settings.SCHEMA_VERSION,
        "evidence": EVIDENCE,
        "stable": report.stable_rate.to_dict(),
        "unstable": report.unstable_rate.to_dict() if report.unstable_rate else None,
        "contraction_constant": report.contraction_constant,
        "expansion_bound": report.expansion_bound,
        "phi_within_expansion_bound": report.phi_within_expansion_bound,
    }
    return context


def collect_trace_table(context):
    cfg = context["config"]
    chart = context["surface"]
    if not isinstance(chart, ConformalChart):
        raise ConfigError("trace needs a conformal-chart surface")
    point = tuple(cfg.trace.point)
    trace = geodesic_trace(chart, point, unit_tangent(chart, point, cfg.trace.angle), cfg.trace.horizon, cfg.integrator)
    context["csv"][settings.TRACE_CSV] = trace.to_frame()
    context["trace"] = trace
    return context

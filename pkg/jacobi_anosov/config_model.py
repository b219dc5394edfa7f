from __future__ import annotations

import json
import math
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # Python 3.10: API-identical backport
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from jacobi_anosov.config import settings
from jacobi_anosov.errors import ConfigError

SURFACE_KINDS = ("constant", "kappa-expression", "conformal-chart")
METHODS = ("DOP853", "RK45", "RK4")
FORMATS = ("csv", "json")


@dataclass
class SurfaceSpec:
    kind: str = "constant"
    # Constant curvature value, a kappa(s) expression or a conformal factor lambda(x, y)
    expression: str = "-1"
    k_lower_bound: float | None = None
    # Profile interval [lo, hi] or chart rectangle [x0, x1, y0, y1]
    domain: list[float] | None = None

    # Conformal charts only
    derivative_mode: str = "analytic"
    fd_step: float = 1e-5
    sample_domain: list[float] | None = None
    lambda_cap: float = 1e8

    def validate(self) -> None:
        if self.kind not in SURFACE_KINDS:
            raise ConfigError(f"surface.kind must be one of {SURFACE_KINDS}, got {self.kind!r}")
        if self.k_lower_bound is not None and not self.k_lower_bound >= 0:
            raise ConfigError("surface.k_lower_bound must be nonnegative")
        if self.kind == "conformal-chart":
            if self.domain is None or len(self.domain) != 4:
                raise ConfigError("a conformal chart needs domain [x0, x1, y0, y1]")
            if self.sample_domain is not None and len(self.sample_domain) != 4:
                raise ConfigError("surface.sample_domain must be [x0, x1, y0, y1]")
            if self.derivative_mode not in ("analytic", "finite-difference"):
                raise ConfigError(f"unknown derivative_mode {self.derivative_mode!r}")
            _require_positive("surface.fd_step", self.fd_step)
            _require_positive("surface.lambda_cap", self.lambda_cap)
        elif self.domain is not None and len(self.domain) != 2:
            raise ConfigError("a curvature profile domain is [lo, hi]")


@dataclass
class IntegratorConfig:
    method: str = "DOP853"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    # Bounds the spacing of dense-output nodes; end-state propagation ignores it
    max_step: float = 0.005
    min_step: float = 1e-12
    # RK4 only
    fixed_step: float = 1e-3

    @property
    def adaptive_method(self) -> str:
        # Event-driven integrations (Riccati, geodesics) need an embedded pair
        return "DOP853" if self.method == "RK4" else self.method

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"integrator.method must be one of {METHODS}, got {self.method!r}")
        _require_positive("integrator.rel_tol", self.rel_tol)
        _require_positive("integrator.abs_tol", self.abs_tol)
        _require_positive("integrator.fixed_step", self.fixed_step)
        if not 0 < self.min_step < self.max_step:
            raise ConfigError("integrator needs 0 < min_step < max_step")


@dataclass
class LimitConfig:
    t_start: float = 8.0
    growth_factor: float = 2.0
    slope_tol: float = 1e-9
    max_horizon: float = 256.0

    def validate(self) -> None:
        _require_positive("limit.t_start", self.t_start)
        _require_positive("limit.slope_tol", self.slope_tol)
        if not self.growth_factor > 1:
            raise ConfigError("limit.growth_factor must exceed 1")
        if not self.max_horizon >= self.t_start:
            raise ConfigError("limit.max_horizon must be at least limit.t_start")


@dataclass
class RiccatiConfig:
    k: float | None = None
    cap: float = 1e6
    start: float = 0.01
    grid_step: float = 1e-3
    bound_tol: float = 1e-7
    growth_radius: float = 10.0
    tail_points: list[float] = field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0])

    def validate(self) -> None:
        for name in ("cap", "start", "grid_step", "bound_tol", "growth_radius"):
            _require_positive(f"riccati.{name}", getattr(self, name))
        if self.k is not None and not self.k >= 0:
            raise ConfigError("riccati.k must be nonnegative")
        if any(not s > 0 for s in self.tail_points):
            raise ConfigError("riccati.tail_points must be positive")


@dataclass
class CheckConfig:
    samples: int = 20
    gap_tol: float = 1e-6
    kappa_tol: float = 1e-9
    bound_cap: float = 1e6
    grid_step: float = 1e-2
    # Dense node spacing for the per-geodesic solutions
    max_step: float = 0.1

    # Chart families
    horizon: float = 40.0
    extra_tangents: list[list[float]] = field(default_factory=list)  # [x, y, angle]

    # Profile families
    shift_range: list[float] = field(default_factory=lambda: [-10.0, 10.0])
    extra_shifts: list[float] = field(default_factory=list)

    # Rate estimation
    fit_window: list[float] = field(default_factory=lambda: [1.0, 8.0])
    phi_step: float = 0.25
    base_offsets: list[float] = field(default_factory=lambda: [0.0])
    audit_tol: float = 1e-6
    contraction_eps: float = 0.5

    def validate(self) -> None:
        if self.samples < 1:
            raise ConfigError("check.samples must be at least 1")
        for name in ("gap_tol", "kappa_tol", "bound_cap", "grid_step", "max_step", "horizon", "phi_step", "audit_tol"):
            _require_positive(f"check.{name}", getattr(self, name))
        _require_interval("check.fit_window", self.fit_window)
        _require_interval("check.shift_range", self.shift_range)
        if self.fit_window[0] < 0:
            raise ConfigError("check.fit_window must lie in [0, inf)")
        if any(t < 0 for t in self.base_offsets):
            raise ConfigError("check.base_offsets must be nonnegative")
        if any(len(t) != 3 for t in self.extra_tangents):
            raise ConfigError("check.extra_tangents entries are [x, y, angle]")
        if not 0 < self.contraction_eps < 1:
            raise ConfigError("check.contraction_eps must lie in (0, 1)")


@dataclass
class TraceConfig:
    point: list[float] = field(default_factory=lambda: [0.0, 0.0])
    angle: float = 0.0
    horizon: float = 10.0

    def validate(self) -> None:
        if len(self.point) != 2:
            raise ConfigError("trace.point must be [x, y]")
        _require_positive("trace.horizon", self.horizon)


@dataclass
class OutputConfig:
    out_dir: str = settings.OUT_DIR
    formats: list[str] = field(default_factory=lambda: list(FORMATS))
    # Spacing of the uniform s grid in exported tables
    grid_step: float = 0.01

    def validate(self) -> None:
        _require_positive("output.grid_step", self.grid_step)
        unknown = set(self.formats) - set(FORMATS)
        if unknown or not self.formats:
            raise ConfigError(f"output.formats must be a nonempty subset of {FORMATS}")


@dataclass
class Assumptions:
    # Hypotheses a local chart cannot verify; echoed into reports
    complete: bool = True
    compactly_homogeneous: bool = True
    # None: inferred from sampled focal monotonicity
    no_focal_points: bool | None = None


@dataclass
class RunConfig:
    seed: int = 1
    window: list[float] = field(default_factory=lambda: [-6.0, 6.0])

    surface: SurfaceSpec = field(default_factory=SurfaceSpec)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    limit: LimitConfig = field(default_factory=LimitConfig)
    riccati: RiccatiConfig = field(default_factory=RiccatiConfig)
    check: CheckConfig = field(default_factory=CheckConfig)
    trace: TraceConfig = field(default_factory=TraceConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    assumptions: Assumptions = field(default_factory=Assumptions)

    def validate(self) -> "RunConfig":
        _require_interval("window", self.window)
        if not self.window[0] <= 0 <= self.window[1]:
            raise ConfigError("window must contain 0")
        for section in (self.surface, self.integrator, self.limit, self.riccati, self.check, self.trace, self.output):
            section.validate()
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def load(path: Path | None) -> "RunConfig":
        if path is None:
            return RunConfig().validate()
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
        try:
            raw = tomllib.loads(text) if path.suffix.lower() == ".toml" else json.loads(text)
        except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
            raise ConfigError(f"cannot parse config {path}: {e}") from None
        return RunConfig.from_dict(raw)

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config root must be a mapping")
        sections = {
            "surface": SurfaceSpec,
            "integrator": IntegratorConfig,
            "limit": LimitConfig,
            "riccati": RiccatiConfig,
            "check": CheckConfig,
            "trace": TraceConfig,
            "output": OutputConfig,
            "assumptions": Assumptions,
        }
        nested = {name: _build(cls, d.get(name, {}), name) for name, cls in sections.items()}
        top = {k: v for k, v in d.items() if k not in sections}
        cfg = _build(RunConfig, top, "config", **nested)
        return cfg.validate()


def _build(cls, d, section: str, **extra):
    if not isinstance(d, dict):
        raise ConfigError(f"{section} must be a mapping")
    known = {f.name for f in fields(cls)} - set(extra)
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {unknown}")
    try:
        return cls(**d, **extra)
    except TypeError as e:
        raise ConfigError(f"invalid {section}: {e}") from None


def _require_positive(name: str, value) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(f"{name} must be a positive number, got {value!r}")


def _require_interval(name: str, value) -> None:
    if len(value) != 2 or not value[0] < value[1]:
        raise ConfigError(f"{name} must be [lo, hi] with lo < hi, got {value!r}")

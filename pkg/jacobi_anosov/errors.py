"""Error hierarchy shared by the library and the command line.

Every error knows the process exit code the CLI should use and can render
itself as a JSON-able dict for the one-line stderr payload.
"""

from __future__ import annotations

EXIT_ANOSOV = 0
EXIT_NOT_ANOSOV = 1
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_HYPOTHESIS = 4


class JacobiAnosovError(Exception):
    kind = "error"
    exit_code = EXIT_CONFIG

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        payload = {"error": self.kind, "message": self.message}
        payload.update(self.details)
        return payload


class ConfigError(JacobiAnosovError):
    kind = "config"
    exit_code = EXIT_CONFIG


class ExpressionParseError(ConfigError):
    kind = "parse"

    def __init__(self, message: str, source: str, position: int):
        super().__init__(f"{message} at position {position}", source=source, position=position)
        self.source = source
        self.position = position


class DomainError(ConfigError):
    kind = "domain"


class InvalidChartError(ConfigError):
    kind = "invalid-chart"


class IntegrationError(JacobiAnosovError):
    kind = "integration"
    exit_code = EXIT_CONVERGENCE

    def __init__(self, message: str, last_good_interval: tuple[float, float] | None = None, **details):
        if last_good_interval is not None:
            details["last_good_interval"] = [float(last_good_interval[0]), float(last_good_interval[1])]
        super().__init__(message, **details)
        self.last_good_interval = last_good_interval


class ConvergenceError(JacobiAnosovError):
    kind = "convergence"
    exit_code = EXIT_CONVERGENCE

    def __init__(self, message: str, residual: float, horizon: float, **details):
        super().__init__(message, residual=float(residual), horizon=float(horizon), **details)
        self.residual = residual
        self.horizon = horizon


class DataError(JacobiAnosovError):
    kind = "data"
    exit_code = EXIT_CONVERGENCE


class ConjugatePointError(JacobiAnosovError):
    kind = "conjugate-point"
    exit_code = EXIT_HYPOTHESIS

    def __init__(self, message: str, brackets: list[tuple[float, float]], geodesic_id: int | None = None, **details):
        details["brackets"] = [[float(lo), float(hi)] for lo, hi in brackets]
        if geodesic_id is not None:
            details["geodesic_id"] = geodesic_id
        super().__init__(message, **details)
        self.brackets = list(brackets)
        self.geodesic_id = geodesic_id


class PoleError(ConjugatePointError):
    kind = "pole"

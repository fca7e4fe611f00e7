"""Exception types raised across the package."""

from __future__ import annotations


class EmulationError(Exception):
    """Base class for every error raised by roboemu."""


class DimensionError(EmulationError, ValueError):
    pass


class SingularConfigurationError(EmulationError):
    """A Jacobian or inertia-derived matrix lost rank at the given state."""

    def __init__(self, message: str, q=None):
        super().__init__(message)
        self.q = q


class ConvergenceError(EmulationError):
    """Newton-Raphson projection did not reach its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class IntegrationError(EmulationError):
    """A non-finite value appeared while integrating."""

    def __init__(self, message: str, step: int | None = None, t: float | None = None):
        where = "" if step is None else f" at step {step} (t={t:.6g})"
        super().__init__(message + where)
        self.step = step
        self.t = t


class ConfigError(EmulationError, ValueError):
    """Scenario validation failure; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field

"""Exception types raised across the package."""

from __future__ import annotations


class InvalidArgumentError(ValueError):
    """A caller-supplied argument is outside the supported range."""


class SingularMatrixError(ArithmeticError):
    """A mass matrix could not be factored (broken or degenerate basis)."""


class DryStateError(ArithmeticError):
    """Water depth dropped to (or below) the configured floor."""


class NoSteadyStateError(ArithmeticError):
    """The steady-state cubic has no admissible root on the requested branch."""

    def __init__(self, message: str, critical_beta: float | None = None):
        super().__init__(message)
        self.critical_beta = critical_beta


class BlowUpError(ArithmeticError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message: str, stage: int, t: float, last_state=None):
        super().__init__(message)
        self.stage = stage
        self.t = t
        self.last_state = last_state


class ConfigError(ValueError):
    """A run configuration is malformed or inconsistent."""

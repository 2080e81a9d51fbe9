"""
Error hierarchy shared by every phononcounts module.

Each class maps onto one CLI exit code so that a pipeline stage can be
re-run or skipped by a calling script without parsing messages.
"""

from typing import Optional


class PhononCountsError(Exception):
    """Base class for all phononcounts errors."""

    exit_code: int = 1


class ConfigError(PhononCountsError, ValueError):
    """Invalid configuration or operation arguments."""

    exit_code = 2


class DataError(PhononCountsError, ValueError):
    """Corrupt input, violated stream invariants or unusable data."""

    exit_code = 3


class InstabilityError(DataError):
    """Blue-detuned drive whose optical anti-damping exceeds the intrinsic damping."""

    def __init__(self, message: str, gamma_bar: float):
        super().__init__(message)
        self.gamma_bar = gamma_bar


class ConvergenceError(PhononCountsError, RuntimeError):
    """A fit that stopped without meeting its convergence criteria."""

    exit_code = 4

    def __init__(self, message: str, result: Optional[object] = None):
        super().__init__(message)
        # Last iterate, so callers can still inspect what the solver reached
        self.result = result


class RootFindingError(RuntimeError):
    """Internal failure of a bracketing root finder."""

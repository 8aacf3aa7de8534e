"""Exception types raised across the package."""


class StochHeatError(Exception):
    """Base class for all package errors."""


class DomainError(StochHeatError, ValueError):
    """An argument lies outside the domain of a mathematical operation."""


class ConfigurationError(StochHeatError, ValueError):
    """Inconsistent sizes, grids or study parameters."""


class FactorizationError(StochHeatError, ArithmeticError):
    """A covariance matrix could not be factored within the jitter ceiling."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class DivergenceError(StochHeatError, ArithmeticError):
    """A simulation produced non-finite values or exceeded its abort level."""

    def __init__(self, message, step=None, value=None):
        super().__init__(message)
        self.step = step
        self.value = value


class NoiseMismatchError(StochHeatError, ValueError):
    """Two trajectories were driven by different noise realizations."""


class FitError(StochHeatError, ValueError):
    """Too few usable points for a convergence-rate fit."""

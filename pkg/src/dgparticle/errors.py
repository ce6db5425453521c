"""Exception types raised across the package."""


class EmptyEnsembleError(ValueError):
    """No particles survived initialization."""


class NumericalDomainError(ArithmeticError):
    """A quantity left its mathematical domain (e.g. log of a nonpositive density)."""


class ConvergenceError(RuntimeError):
    """Fixed-point iteration did not meet its tolerance.

    ``residuals`` holds the relative change of every sweep, ``step`` the
    time-step index when raised from a run.
    """

    def __init__(self, message, residuals=(), step=None):
        super().__init__(message)
        self.residuals = list(residuals)
        self.step = step


class ConfigError(ValueError):
    """Invalid scenario configuration."""

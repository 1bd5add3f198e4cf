"""Exception types shared across the package."""


class InvalidSpec(ValueError):
    """A measure specification violates its invariants."""


class InvalidInput(ValueError):
    """An operation was called with arguments outside its contract."""


class QuadratureFailure(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance.

    Carries the error estimate that was actually achieved.
    """

    def __init__(self, message, achieved_error=None):
        super().__init__(message)
        self.achieved_error = achieved_error


class NumericalFailure(RuntimeError):
    """An iterative solve failed to converge; carries the residual norm."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""

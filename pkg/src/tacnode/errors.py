"""Exception types shared across the package."""


class TacnodeError(Exception):
    """Base class for all package errors."""


class DomainError(TacnodeError, ValueError):
    """An argument lies outside the domain of the operation."""


class NonConvergence(TacnodeError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance.

    The final residual is kept on ``residual`` for diagnostics.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StiffnessFailure(TacnodeError, RuntimeError):
    """Adaptive step size collapsed below the configured floor."""


class FitFailure(TacnodeError, RuntimeError):
    """Extrapolated sequence did not stabilize."""


class SingularGram(TacnodeError, RuntimeError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class CaseError(TacnodeError, ValueError):
    """Parameters are not in the phase required by the operation."""


class AccuracyWarning(UserWarning):
    """A numerical diagnostic exceeded its tolerance (reported, not fatal)."""

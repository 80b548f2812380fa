"""Exception types raised by the solver modules."""

from __future__ import annotations


class MFGError(Exception):
    """Base class for all library errors."""


class ShapeMismatch(MFGError, ValueError):
    """A field does not match the grid it is used with."""


class IncompatibleRHS(MFGError):
    """Neumann Poisson right-hand side does not integrate to zero."""


class SingularSystem(MFGError):
    """A sparse linear solve failed or produced non-finite values."""


class NegativeDensity(MFGError, ValueError):
    """A density value below zero was passed where m >= 0 is required."""


class BadParameter(MFGError, ValueError):
    """A model or formula parameter is outside its admissible range."""


class NewtonDiverged(MFGError):
    """Newton iteration for the ergodic HJB equation did not converge."""

    def __init__(self, message: str, residual: float = float("nan"), iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations

    def __reduce__(self):
        return (type(self), (str(self), self.residual, self.iterations))


class NoBarrier(MFGError):
    """The scalar barrier equation has no pair of positive roots."""


class NonPositive(MFGError):
    """A Fokker-Planck solution has a non-positive entry."""


class LineSearchStalled(MFGError):
    """No feasible descent step above the minimal step length."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class DualityFailed(MFGError):
    """The flux and the value-function gradient are not dual to tolerance."""

    def __init__(self, message: str, solution=None):
        super().__init__(message)
        self.solution = solution


class ContinuationDiverged(MFGError):
    """sup m grew by more than the allowed factor along the epsilon ladder."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = history


class NonConvergence(MFGError):
    """An iterative method reached its iteration cap."""


class InfeasibleEps(MFGError, ValueError):
    """A perturbation amplitude makes the density fall below the floor."""


class BumpEscapesDomain(MFGError, ValueError):
    """A concentrated bump has support outside the domain."""


class ConfigInvalid(MFGError, ValueError):
    """A run configuration failed validation."""

    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason

    def __reduce__(self):
        return (type(self), (self.field, self.reason))

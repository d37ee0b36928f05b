from typing import Optional


class LabError(Exception):
    """Base class of every error raised by the laboratory."""


class DomainError(LabError, ValueError):
    """An input lies outside the domain of an operation (t <= 0, exterior point, ...)."""


class HypothesisError(DomainError):
    """A theorem hypothesis required by the requested computation does not hold.

    Attributes:
        theorem: Name of the result whose hypothesis is violated.
    """

    def __init__(self, message: str, theorem: str):
        super().__init__(f"{message} (per {theorem})")
        self.theorem = theorem


class AccuracyError(LabError):
    """A quadrature or extrapolation did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: Optional[float] = None):
        detail = f"{message} (achieved error estimate {achieved:.3g})" if achieved is not None else message
        super().__init__(detail)
        self.achieved = achieved


class DivergenceError(LabError):
    """A functional of the initial datum is infinite (non-integrable data)."""

    def __init__(self, message: str, where: Optional[float] = None):
        super().__init__(message)
        self.where = where


class ConsistencyError(LabError):
    """An exact property of a numerical construction was violated beyond rounding."""

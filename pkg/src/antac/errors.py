"""Exception hierarchy shared across the package."""


class AntacError(Exception):
    """Base class for all package-specific errors."""


class DomainError(AntacError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionMismatch(AntacError, ValueError):
    """Array shapes are inconsistent with each other or with the operation."""


class NotPositiveDefinite(AntacError, ArithmeticError):
    """A matrix required to be positive definite failed its pivot test."""


class SingularPsi(AntacError, ArithmeticError):
    """The 2x2 residual cross-product matrix of an edge is numerically singular."""


class GenerationFailed(AntacError, RuntimeError):
    """A randomized model generator exhausted its resampling budget."""

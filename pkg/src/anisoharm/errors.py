"""Exception types shared across the package."""


class AnisoHarmError(Exception):
    """Base class for all package errors."""


class DomainError(AnisoHarmError, ValueError):
    """Raised when an input lies outside an operation's domain (e.g. x = 0)."""


class PreconditionError(AnisoHarmError, ValueError):
    """Raised when a hypothesis required by an operation is not met."""


class EvaluationError(AnisoHarmError, RuntimeError):
    """Raised when a field, kernel or integrand produces non-finite values."""


class CalibrationError(AnisoHarmError, RuntimeError):
    """Raised when frozen calibration caps do not match the running config."""

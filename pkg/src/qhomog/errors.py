"""Exception types raised across the package."""


class HomogeniserError(Exception):
    """Base class for all package errors."""


class SizeError(HomogeniserError, ValueError):
    """Requested Hilbert space exceeds the configured qubit cap."""


class DomainError(HomogeniserError, ValueError):
    """Numeric argument outside its admissible range."""


class ScheduleValidationError(HomogeniserError):
    """An interaction schedule does not reproduce the closed-form marginals."""


class ParseError(HomogeniserError, ValueError):
    """Malformed spin-system config or pulse file."""


class ConfigurationError(HomogeniserError):
    """Missing or inconsistent run configuration (e.g. absent pulse file)."""


class NormalisationError(HomogeniserError, ZeroDivisionError):
    """Reference intensity is zero, so normalisation is undefined."""

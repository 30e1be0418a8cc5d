"""Exception types shared across the package.

The CLI maps these onto exit codes, so library code should raise the most
specific one that applies.
"""


class ShotQrngError(Exception):
    """Base class for package errors."""

    kind = "error"


class DomainError(ShotQrngError, ValueError):
    """An input lies outside the mathematical domain of an operation."""

    kind = "domain"


class ConfigurationError(ShotQrngError, ValueError):
    """Parameters are missing, malformed or mutually inconsistent."""

    kind = "configuration"


class EstimationError(DomainError):
    """A trace cannot support parameter estimation (too short, saturated)."""

    kind = "estimation"

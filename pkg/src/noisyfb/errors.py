"""Exception types raised across the package."""


class NoisyFeedbackError(Exception):
    """Base class for all package errors."""


class DomainError(NoisyFeedbackError, ValueError):
    """An argument lies outside the domain of the operation."""


class DimensionDeficitError(NoisyFeedbackError, ValueError):
    """Not enough coordinates to place the requested codewords."""


class ConfigError(NoisyFeedbackError, ValueError):
    """Invalid run configuration (CLI exit code 1)."""

"""Exception types shared by the package.

Each class carries an ``exit_code`` used by the command line front-end.
"""


class LongwaveError(Exception):
    exit_code = 1


class ConfigError(LongwaveError):
    """Malformed or inconsistent scenario configuration."""

    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ArgumentError(LongwaveError, ValueError):
    exit_code = 2


class NumericError(LongwaveError):
    """A numerical procedure failed to reach its tolerance."""

    exit_code = 3

    def __init__(self, message, achieved=None):
        if achieved is not None:
            message = f"{message} (achieved {achieved:.3e})"
        super().__init__(message)
        self.achieved = achieved


class SingularityError(NumericError):
    pass


class DegenerateFocalError(NumericError):
    pass


class CapabilityError(NumericError):
    pass


class ValidityError(LongwaveError):
    exit_code = 4


class DomainError(ValidityError):
    """Query outside the region where the bathymetry is defined."""


class ConsistencyError(ValidityError):
    """Two independent computations of the same quantity disagree."""


class ResolutionError(ValidityError):
    """Grid too coarse for the requested field."""

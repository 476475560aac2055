"""Exception types shared across the package."""


class DyadfuseError(Exception):
    """Base class for all package-specific errors."""


class InputShapeError(DyadfuseError):
    """A matrix, vector, or sequence has an incompatible shape or length."""


class ParseError(DyadfuseError):
    """A file cell or field could not be parsed as the expected type."""


class EmptyInputError(DyadfuseError):
    """An operation received an empty matrix, file body, or index set."""


class InsufficientDataError(DyadfuseError):
    """Too few windows (or an empty split) for the requested operation."""


class DegenerateSegmentError(DyadfuseError):
    """A segment is too short for canonical correlation analysis."""


class ConfigError(DyadfuseError):
    """Invalid configuration value, unknown key, or format-version mismatch."""


class NumericalError(DyadfuseError):
    """A non-finite value appeared where finite arithmetic is required."""


class UndefinedMetricError(DyadfuseError):
    """The requested metric is undefined for the given inputs."""


class IoError(DyadfuseError):
    """Reading or writing an artifact file failed."""

"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes: config 2, data 3,
numeric 4, I/O 5 (OSError is used directly for the last).
"""


class BeamvistaError(Exception):
    """Base class for all package errors."""


class ConfigError(BeamvistaError):
    """Invalid or inconsistent configuration."""


class DataError(BeamvistaError):
    """Problem with dataset contents or availability."""


class CorruptionError(DataError):
    """Stored data failed an integrity (hash) check."""


class FormatError(DataError):
    """File is not in the expected container format/version."""


class NumericError(BeamvistaError):
    """Non-finite values or numerically undefined operation."""


class GeometryError(BeamvistaError):
    """Degenerate geometry (e.g. coincident positions)."""


class VisibilityError(BeamvistaError):
    """No camera sees the requested target."""

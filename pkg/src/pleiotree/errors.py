"""Exception hierarchy shared across the package."""


class PleiotreeError(Exception):
    """Base class for all package errors."""


class ConfigError(PleiotreeError, ValueError):
    """Invalid configuration value (trait count, tuning knobs, flags)."""


class ShapeError(PleiotreeError, ValueError):
    """Dimension mismatch between panels, matrices, or trees."""


class DataError(PleiotreeError, ValueError):
    """Bad input data: malformed files, out-of-range values, misaligned ids."""


class NumericError(PleiotreeError, ArithmeticError):
    """Non-finite or otherwise invalid numeric state during fitting."""

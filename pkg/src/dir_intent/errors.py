"""Exception types shared across the package.

The CLI maps each family to a process exit code.
"""


class DirError(Exception):
    exit_code = 1


class ConfigError(DirError):
    exit_code = 2


class DataError(DirError):
    exit_code = 3


class NumericalError(DirError):
    exit_code = 4


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""

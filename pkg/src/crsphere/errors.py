"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, ObstructionError -> 3,
NumericalError -> 4. Everything else is a plain bug.
"""


class CrsphereError(Exception):
    """Base class for package errors."""


class ConfigError(CrsphereError):
    """Invalid configuration, dimensions, or resource caps."""


class DimensionMismatchError(ConfigError):
    """Operands built for different ambient dimensions."""


class CapExceededError(ConfigError):
    """A requested truncation exceeds the configured size cap."""


class ObstructionError(CrsphereError):
    """Mathematical obstruction: the requested solve has no solution."""

    def __init__(self, message, obstruction_norm=None):
        super().__init__(message)
        self.obstruction_norm = obstruction_norm


class NumericalError(CrsphereError):
    """A numerical routine failed (non-positive weight, eigensolver failure)."""

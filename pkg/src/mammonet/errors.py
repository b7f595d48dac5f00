"""Exception hierarchy shared across the package.

Every expected failure raises a MammonetError subclass; the CLI maps these
to exit codes (configuration -> 2, I/O and format -> 3, numeric -> 4).
"""


class MammonetError(Exception):
    """Base class for all expected failures."""


class DimensionError(MammonetError):
    """Shapes of inputs, weights, or gradients do not line up."""


class ConfigurationError(MammonetError):
    """Invalid option, hyperparameter, or dataset layout."""


class InputError(MammonetError):
    """A value is outside its documented domain (e.g. class index >= k)."""


class NumericError(MammonetError):
    """Non-finite value encountered where finiteness is required."""


class StateError(MammonetError):
    """Operation called out of order (e.g. backward without a forward cache)."""


class FormatError(MammonetError):
    """Malformed serialized file. Carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset

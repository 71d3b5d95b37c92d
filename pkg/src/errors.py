"""Exception hierarchy shared by every package."""

from typing import Optional


class SCLCError(Exception):
    """Base class for all library errors."""


class UnsupportedShapeError(SCLCError, ValueError):
    """Tensor dimensions are not supported by the requested transform."""


class ShapeMismatchError(SCLCError, ValueError):
    """Operand shapes disagree."""


class InvalidShapeError(SCLCError, ValueError):
    """A shape is malformed, e.g. a kernel larger than its image."""


class InvalidCropError(SCLCError, ValueError):
    """Crop target exceeds the source size."""


class InvalidPadError(SCLCError, ValueError):
    """Pad target is smaller than the source size."""


class TransformError(SCLCError, ValueError):
    """A network spec cannot be turned into its linear counterpart."""


class ConfigError(SCLCError, ValueError):
    """Invalid configuration value."""


class EmptyDatasetError(SCLCError, ValueError):
    """A dataset has no samples."""


class InsufficientDataError(SCLCError, ValueError):
    """Too few measurements for a fit."""


class FormatError(SCLCError, ValueError):
    """A binary file does not follow its documented layout."""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class StateError(SCLCError, RuntimeError):
    """Required cached state (tape, forward input) is missing."""


class NonFiniteError(SCLCError, RuntimeError):
    """NaN or infinity appeared in a tensor, activation or loss."""


class BenchmarkError(SCLCError, RuntimeError):
    """The benchmark harness cannot run in the current process state."""


class MissingCheckpointError(SCLCError, RuntimeError):
    """A command needs a checkpoint that does not exist."""

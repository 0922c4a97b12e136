"""Exception hierarchy shared by the library and the CLI."""


class RieszLabError(Exception):
    """Base class for all library errors."""


class ParamsError(RieszLabError, ValueError):
    """Malformed Ornstein parameters or distributions (CLI exit 2)."""


class RealizationError(RieszLabError, ValueError):
    """Spacer offsets inconsistent with the parameters."""


class WindowRangeError(RieszLabError, ValueError):
    """Correlation window larger than the finite tower supports."""


class GridMismatchError(RieszLabError, ValueError):
    """Grid arrays of different sizes were combined."""


class EmptyMaskError(RieszLabError, ValueError):
    """The F_epsilon mask is empty; the degenerate-case bound applies instead."""


class InvariantViolation(RieszLabError, AssertionError):
    """A mathematical invariant failed beyond its tolerance (CLI exit 3)."""


class ResourceLimitError(RieszLabError, MemoryError):
    """The requested computation exceeds the configured budget (CLI exit 4)."""

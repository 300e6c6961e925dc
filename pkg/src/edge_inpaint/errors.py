"""Exception and warning types shared across the package."""


class InpaintError(Exception):
    """Base class for all package errors."""


class ShapeError(InpaintError, ValueError):
    """Tensor dimensions do not line up."""


class ParameterError(InpaintError, ValueError):
    """An argument is outside its valid range."""


class DegenerateInputError(InpaintError, ValueError):
    """Input makes the quantity undefined (e.g. division by a zero norm)."""


class WeightArchiveError(InpaintError):
    """Weight archive is malformed or truncated."""


class WeightMismatchError(InpaintError):
    """Archive tensors do not match the network they are loaded into."""


class DegenerateInputWarning(RuntimeWarning):
    """A value was returned for an input where the quantity is degenerate."""

"""Exception hierarchy shared by all modules."""

from __future__ import annotations

import numpy as np


class JetOpticsError(Exception):
    """Base class for every error raised by the package."""


class _PointwiseError(JetOpticsError):
    # mask marks the offending batch entries when evaluation was vectorised
    def __init__(self, message: str, mask=None):
        super().__init__(message)
        self.mask = None if mask is None else np.asarray(mask, dtype=bool)


class DomainError(_PointwiseError, ValueError):
    """An expression was evaluated outside its real domain."""


class SingularMetric(_PointwiseError):
    """A metric block has (relatively) vanishing determinant."""


class DegenerateMedium(_PointwiseError):
    """The factor 1 + A0 is not safely positive."""


class OrderError(JetOpticsError, ValueError):
    """A derivative order beyond what the jet engine carries was requested."""


class ShapeError(JetOpticsError, ValueError):
    """Tensor shapes or index kinds do not match."""


class NotIsotropic(JetOpticsError):
    """The operation needs fiber-independent A but A depends on the fibers."""


class NotClassical(JetOpticsError):
    """The scenario is not a single-time Synge medium."""


class DimensionNotice(JetOpticsError, UserWarning):
    """A dimension-dependent formula is not applicable for these p, n."""


class ParseError(JetOpticsError, ValueError):
    """Malformed expression text."""

    def __init__(self, message: str, position: int = -1):
        if position >= 0:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class UnknownVariable(ParseError):
    """An identifier is neither a coordinate, a function nor a constant."""


class ArityError(ParseError):
    """A coordinate index is out of range for the declared dimensions."""


class SchemaError(JetOpticsError, ValueError):
    """A scenario document does not follow the expected layout."""


class ValidationError(JetOpticsError, ValueError):
    """A scenario document is well formed but mathematically invalid."""

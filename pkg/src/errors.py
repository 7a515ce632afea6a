"""Exception hierarchy shared by every spreadlab module."""

from typing import Any, Optional


class SpreadLabError(Exception):
    """Base class for all spreadlab errors."""


class RankDeficient(SpreadLabError, ValueError):
    """A matrix that must have full column rank does not."""


class Singular(SpreadLabError, ValueError):
    """A least-squares or distortion problem is singular."""


class NotOrthonormal(SpreadLabError, ValueError):
    """A basis argument fails the BᵀB = I check."""


class ZeroVector(SpreadLabError, ValueError):
    """A ratio was requested for the zero vector."""


class TooLarge(SpreadLabError, ValueError):
    """An exact enumeration would exceed its configured cap."""


class Inapplicable(SpreadLabError, ValueError):
    """A conversion formula does not apply to the given bound."""


class DimensionError(SpreadLabError, ValueError):
    """Construction parameters do not fit the requested shape."""


class UnknownTag(SpreadLabError, ValueError):
    """An unrecognised construction tag."""


class NotIntegerShift(SpreadLabError, ValueError):
    """A shift that must be an integer multiple of the amplitude is not."""


class DomainError(SpreadLabError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class MatrixFormatError(SpreadLabError, ValueError):
    """A matrix file is malformed."""


class FormulaMismatch(SpreadLabError):
    """A closed form disagrees with its series oracle."""

    def __init__(self, message: str, closed: float, series: float):
        super().__init__(message)
        self.closed = closed
        self.series = series


class ScreeningFailed(SpreadLabError):
    """Every screening attempt for a random design was refuted."""


class NoConvergence(SpreadLabError):
    """An iterative solver hit its iteration cap above tolerance.

    Attributes:
        best: Best iterate found, if any
        residual: Residual of the best iterate
    """

    def __init__(
        self,
        message: str,
        best: Optional[Any] = None,
        residual: Optional[float] = None,
    ):
        super().__init__(message)
        self.best = best
        self.residual = residual

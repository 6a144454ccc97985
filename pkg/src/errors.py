"""
Exception hierarchy.

Every error raised on purpose by the library derives from MTFError so the
command-line layer can map failures onto exit codes in one place.
"""

from typing import Optional, Tuple


class MTFError(Exception):
    """Base class for all library errors."""


class DomainError(MTFError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedOrderError(MTFError, ValueError):
    """A Fermi-Dirac integral order that is not implemented."""


class UnsupportedGeometryError(MTFError):
    """Nuclear geometry the radial solver cannot represent (more than one center)."""


class InvariantViolation(MTFError):
    """
    A field violates one of its structural invariants.

    Not a ValueError, so pydantic validators let it propagate unchanged.
    """


class SetupError(MTFError):
    """The problem is not well posed on the chosen grid."""


class BracketError(MTFError, ArithmeticError):
    """A monotone root search could not bracket its target."""

    def __init__(self, message: str, bracket: Optional[Tuple[float, float]] = None):
        if bracket is not None:
            message = f"{message} (last bracket tried: [{bracket[0]:.6g}, {bracket[1]:.6g}])"
        super().__init__(message)
        self.bracket = bracket


class RangeError(MTFError, OverflowError):
    """A value is not representable in double precision."""


class InternalError(MTFError, RuntimeError):
    """A state the algorithms guarantee cannot occur."""


class ConvergenceError(MTFError, RuntimeError):
    """Raised by the solver only when the caller asks for exceptions on failure."""


class ConfigError(MTFError):
    """Invalid run configuration."""

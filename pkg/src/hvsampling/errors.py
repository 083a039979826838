"""Error types shared across the package.

Every failure mode raised by library code subclasses :class:`HvError` and
carries a stable ``code`` string (the class name minus the ``Error`` suffix).
The CLI and the HTTP service both surface errors as ``"<code>: <message>"``,
so the codes are part of the public contract and must not be renamed
casually.
"""

from __future__ import annotations

__all__ = [
    "HvError",
    "NonProbabilityError",
    "NonIntegerSizeError",
    "DegenerateSizeError",
    "ZeroPrefixError",
    "OutOfRangeError",
    "NumericalUnderflowError",
    "ProbabilityOverflowError",
    "DivideByZeroError",
    "TooLargeError",
    "DimensionMismatchError",
    "ZeroJointError",
    "TooSmallError",
    "SaturatedError",
    "InfeasibleGridError",
    "TooFewReplicatesError",
]


class HvError(Exception):
    """Base class for all validation and numerical errors raised here."""

    @property
    def code(self) -> str:
        name = type(self).__name__
        return name[:-5] if name.endswith("Error") else name


class NonProbabilityError(HvError):
    """An inclusion probability is outside (0, 1) or not finite."""


class NonIntegerSizeError(HvError):
    """Probabilities do not sum to an integer within tolerance."""


class DegenerateSizeError(HvError):
    """The implied sample size is 0 or the population size."""


class ZeroPrefixError(HvError):
    """A prefix sum that must be positive is zero; the split is undefined."""


class OutOfRangeError(HvError):
    """A requested branch index or size is outside its valid range."""


class NumericalUnderflowError(HvError):
    """An intermediate weight went negative beyond tolerance."""


class ProbabilityOverflowError(HvError):
    """An updated probability exceeds 1 beyond tolerance; invalid state."""


class DivideByZeroError(HvError):
    """A denominator that must stay positive reached zero."""


class TooLargeError(HvError):
    """The problem size exceeds the cap for exact enumeration."""


class DimensionMismatchError(HvError):
    """Array lengths disagree with the design size."""


class ZeroJointError(HvError):
    """A joint probability needed in a denominator is zero."""


class TooSmallError(HvError):
    """The design is too small for the requested diagnostic."""


class SaturatedError(HvError):
    """Size-proportional allocation pushed some probability to 1 or above.

    ``units`` holds the offending 0-based positions in the caller's order.
    """

    def __init__(self, message: str, units=None):
        super().__init__(message)
        self.units = list(units) if units is not None else []


class InfeasibleGridError(HvError):
    """A grid sample size is incompatible with the population size."""


class TooFewReplicatesError(HvError):
    """Replicate count too small for a stable frequency comparison."""

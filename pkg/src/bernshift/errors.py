"""Exception hierarchy shared by all modules.

The CLI maps :class:`PreconditionError` (and subclasses) to exit status 2.
"""


class BernShiftError(Exception):
    """Base class for every error raised by the package."""


class PreconditionError(BernShiftError, ValueError):
    """An operation was called outside its domain."""


class InvalidRule(PreconditionError):
    pass


class SingularMarginal(PreconditionError):
    """A marginal with |a_k| = 1 (or a zero-mass symbol) was encountered."""


class HorizonTooShort(PreconditionError):
    """The word is too short to meet the requested tolerance."""


class ToleranceUnreachable(PreconditionError):
    """No truncation index within budget certifies the requested tolerance."""


class OdometerOverflow(PreconditionError):
    """The odometer carry ran past the word's horizon (all-ones prefix)."""


class ZeroMassSymbol(SingularMarginal):
    pass


class RegimeViolation(PreconditionError):
    pass


class BudgetExhausted(BernShiftError):
    pass


class CertificateNotFound(BernShiftError, LookupError):
    """No index in the scanned range supports the requested essential value."""

    def __init__(self, message, scanned_to=None):
        super().__init__(message)
        self.scanned_to = scanned_to


class StageInfeasible(PreconditionError):
    """A construction stage does not fit under the configured caps."""

"""Exception hierarchy shared by all deflatron modules."""


class DeflatronError(Exception):
    """Base class for library errors."""


class DimensionMismatch(DeflatronError, ValueError):
    pass


class NotPositiveDefiniteError(DeflatronError, ValueError):
    pass


class IndefiniteOperatorError(DeflatronError, ArithmeticError):
    """CG met ``<p, Ap> <= 0``."""


class RankDeficientError(DeflatronError, ValueError):
    pass


class CoarseSolveError(DeflatronError, RuntimeError):
    """Inner (coarse) solve failed to reach its declared tolerance."""


class SizeLimitError(DeflatronError, ValueError):
    """Dense analysis requested above the configured size cap."""


class PreconditionError(DeflatronError, ValueError):
    pass


class SpectrumClassificationError(DeflatronError, ArithmeticError):
    """Zero/nonzero split of a deflated spectrum is ambiguous."""


class ConvergenceBoundViolation(DeflatronError, AssertionError):
    pass


class BoundViolation(DeflatronError, AssertionError):
    """A computed constant breaks one of the proven inequalities."""

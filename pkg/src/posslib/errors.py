"""Exception and warning classes raised across posslib."""


class PossError(Exception):
    """Base class for all posslib errors."""


class InvalidPossibility(PossError, ValueError):
    """Values do not form a valid possibility function."""


class AllZero(InvalidPossibility):
    pass


class NegativeValue(InvalidPossibility):
    pass


class NonFinite(PossError, ValueError):
    pass


class BadAxis(PossError, ValueError):
    pass


class ZeroMarginal(PossError, ValueError):
    pass


class GridMismatch(PossError, ValueError):
    pass


class NotAtMode(PossError, ValueError):
    pass


class Inconsistent(PossError, ValueError):
    """Prior and likelihood are in total conflict (Z_max = 0)."""


class BadAlpha(PossError, ValueError):
    pass


class BadParameter(PossError, ValueError):
    pass


class DomainError(PossError, ValueError):
    pass


class Unbounded(PossError, ArithmeticError):
    """A supremum diverges on the search domain."""


class NoConvergence(PossError, ArithmeticError):
    pass


class NoMle(PossError, ValueError):
    pass


class NonSingletonMode(PossError, ValueError):
    pass


class InnerUnbounded(Unbounded):
    pass


class InnerNoConvergence(NoConvergence):
    pass


class SingularPrecision(PossError, ArithmeticError):
    pass


class MissingStandardForm(PossError, ValueError):
    pass


class Degenerate(PossError, ValueError):
    pass


class ConsistencyError(PossError, ArithmeticError):
    """Two independent computation routes disagree beyond tolerance."""


class SingularHessianWarning(RuntimeWarning):
    pass


class BoundaryParameterWarning(RuntimeWarning):
    pass


class OutsideHullWarning(RuntimeWarning):
    pass


class NegativeLossWarning(UserWarning):
    pass

"""Exception types raised by the package."""


class CollocationError(Exception):
    """Base class for all errors raised by expcolloc."""


class DomainError(CollocationError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class RangeError(DomainError):
    """A query point lies outside the range covered by a representation."""


class ConstructionError(CollocationError, ValueError):
    """Input data cannot produce a valid object (e.g. non-increasing knots)."""


class SingularDensityError(CollocationError, ArithmeticError):
    """The implied density is unbounded because g is flat at the query point."""


class AccuracyError(CollocationError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance.

    The best estimate and its error bound are kept on the exception so callers
    can decide whether to use them anyway.
    """

    def __init__(self, message, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error

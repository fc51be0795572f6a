"""Exception hierarchy shared by the solver modules."""


class DualNehariError(Exception):
    """Base class for all solver errors."""


class NonFiniteValue(DualNehariError):
    pass


class NotPeriodic(DualNehariError):
    pass


class GridMismatch(DualNehariError):
    pass


class NonPositiveK(DualNehariError):
    """Raised when a limit-problem source k <= 0 (Landesman-Lazer fails on that side)."""


class NoInteriorSolution(DualNehariError):
    """A signed minimizer touches zero inside an interval declared long enough."""


class NonConvergence(DualNehariError):
    pass


class EigSolveFailure(DualNehariError):
    pass


class CertificationFailed(DualNehariError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class BoundaryStuck(DualNehariError):
    """Partition ascent ended on the spacing boundary of the admissible set."""


class NoBracket(DualNehariError):
    pass


class SignViolation(DualNehariError):
    pass


class SubIntervalError(DualNehariError):
    """Wraps a minimizer failure with the index of the offending sub-interval."""

    def __init__(self, index, cause):
        super().__init__(f"sub-interval {index}: {cause}")
        self.index = index
        self.cause = cause

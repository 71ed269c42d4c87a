"""Exception types raised by the library."""


class QCRLError(Exception):
    """Base class for all library errors."""


class ContractViolation(QCRLError, ValueError):
    """An argument broke an operation's precondition."""


class DimensionMismatch(ContractViolation):
    pass


class BranchAmbiguity(QCRLError):
    """The matrix logarithm branch cannot be chosen without a hint."""


class Unsupported(QCRLError):
    pass


class OutOfRange(QCRLError, ValueError):
    pass


class NoDescent(QCRLError):
    """Backtracking line search failed to find a decrease."""


class TraversalAborted(QCRLError):
    """A level-set traversal stopped early.

    ``records`` holds every record produced before the failure and
    ``index`` the index of the last good one.
    """

    def __init__(self, message, records=None, index=None):
        super().__init__(message)
        self.records = list(records or [])
        self.index = index


class IrregularPoint(TraversalAborted):
    """The gate-angle gradient lies (numerically) in the constraint span."""


class MaxItersExceeded(TraversalAborted):
    pass


class StepToleranceExceeded(TraversalAborted):
    pass

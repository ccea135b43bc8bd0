"""Exception types raised across the package."""


class BalanceNetError(Exception):
    """Base class for all package errors."""


class InvalidInput(BalanceNetError, ValueError):
    pass


class NotPositiveDefinite(BalanceNetError, ValueError):
    pass


class SingularBlock(BalanceNetError, ArithmeticError):
    """The E x E Kronecker block is numerically singular."""


class MaxItersExceeded(BalanceNetError, RuntimeError):
    """Raised by callers that treat solver non-convergence as fatal."""


class UnsupportedSize(BalanceNetError, ValueError):
    pass


class NoEdges(BalanceNetError, ValueError):
    pass


class InsufficientData(BalanceNetError, ValueError):
    pass

"""Exception hierarchy shared by all rhlearn modules."""


class RhlearnError(Exception):
    """Base class for all errors raised by rhlearn."""


class DimensionMismatch(RhlearnError, ValueError):
    pass


class NumericalFailure(RhlearnError, ArithmeticError):
    """A factorization or solve broke down."""


class InfeasibleConstraints(NumericalFailure):
    pass


class IndefiniteReducedHessian(NumericalFailure):
    pass


class TerminalInfeasible(NumericalFailure):
    """The requested terminal state cannot be reached within the horizon."""


class RestorationFailed(NumericalFailure):
    """No point of the blending grid produced a controllable model."""


class HorizonExceeded(RhlearnError, IndexError):
    pass


class EmptyLog(RhlearnError, ValueError):
    pass

"""Exception hierarchy shared by all modules."""


class IFSJacobiError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(IFSJacobiError, ValueError):
    """An argument is outside its documented range."""


class DomainError(IFSJacobiError, ValueError):
    """A point or interval lies outside the domain of a map or density."""


class SingularityError(DomainError):
    """Evaluation point coincides with an atom of a discrete measure."""

    def __init__(self, msg, atom=None):
        super().__init__(msg)
        self.atom = atom


class NumericError(IFSJacobiError, ArithmeticError):
    """Floating point breakdown (zero divisor, lost positivity, no convergence)."""


class InstabilityError(NumericError):
    """A quantity that must stay positive became non-positive."""


class PoleError(NumericError):
    """The evaluation point sits on a zero of a monic orthogonal polynomial."""

    def __init__(self, msg, index):
        super().__init__(msg)
        self.index = index


class StateError(IFSJacobiError, RuntimeError):
    """Operation called on an object in the wrong state."""


class ConvergenceError(IFSJacobiError, RuntimeError):
    """An iteration did not converge; ``state`` holds the last iterate."""

    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


class BudgetError(IFSJacobiError, RuntimeError):
    """A global work budget was exhausted; ``partial`` holds what was done."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial

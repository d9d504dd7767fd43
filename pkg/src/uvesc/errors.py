"""Exception hierarchy shared by all modules."""


class UvescError(Exception):
    """Base class for toolkit errors."""


class DomainError(UvescError, ValueError):
    """An input violates a mathematical precondition (shape, symmetry, definiteness)."""


class NumericalError(UvescError, ArithmeticError):
    """A computation produced non-finite values or hit a singular matrix."""


class SynthesisError(UvescError):
    """Base class for failures of the LMI synthesis stage."""


class SolverFailure(SynthesisError):
    """The optimization backend broke down numerically."""


class Infeasible(SynthesisError):
    """The backend reported the LMI program infeasible."""


class ToleranceViolation(SynthesisError):
    """The backend returned an assignment the independent verifier rejects."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report

"""Unit-vector extremum seeking: LMI gain synthesis, certificate checks and simulation."""

from .errors import (DomainError, Infeasible, NumericalError, SolverFailure, SynthesisError,
                     ToleranceViolation, UvescError)

__version__ = "0.1.0"

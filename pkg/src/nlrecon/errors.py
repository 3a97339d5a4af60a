"""Exception types shared across the package."""

from __future__ import annotations

__all__ = [
    "NlreconError",
    "EvaluationError",
    "SingularConstraintError",
    "DegeneratePointError",
    "ProjectionError",
    "SingularKKTError",
    "ApplicabilityError",
    "SolverQualityError",
]


class NlreconError(Exception):
    """Base class for library-specific failures."""


class EvaluationError(NlreconError):
    """A constraint, gradient, or Hessian evaluation produced invalid output."""


class SingularConstraintError(NlreconError):
    """Constraint Jacobian is rank deficient at the queried point."""


class DegeneratePointError(NlreconError):
    """A constraint gradient vanishes where a nonzero normal is required."""


class ProjectionError(NlreconError):
    """Projection solver failed to converge.

    Attributes:
        result: Best iterate found, packaged as a ``ProjectionResult`` with
            ``converged=False``, or ``None`` when no iterate was produced.
    """

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class SingularKKTError(ProjectionError):
    """Every solver attempt hit a singular KKT system."""


class ApplicabilityError(NlreconError):
    """A guarantee check was invoked outside its hypotheses."""


class SolverQualityError(NlreconError):
    """Solver output is too loose for the requested diagnostic."""

"""Exception hierarchy for the RCBF simulator."""

from __future__ import annotations


class RcbfSimError(RuntimeError):
    """Base class for every error raised by :mod:`rcbf_sim`."""


class GravitySingularityError(RcbfSimError):
    """Raised when gravity is evaluated at the attracting center."""


class IntegrationError(RcbfSimError):
    """Raised when an integration step produces non-finite values."""


class ConstraintSingularityError(RcbfSimError):
    """Raised when a keep-out constraint is evaluated at its own center."""


class PhiDomainError(RcbfSimError):
    """Raised when an argument falls outside the range of an authority function."""


class DegenerateSlopeError(RcbfSimError):
    """Raised when the authority derivative vanishes at the barrier value."""


class NoValidPhiError(RcbfSimError):
    """Raised when no nonpositive authority function exists for the parameters."""


class ManeuverSingularityError(RcbfSimError):
    """Raised when an evading maneuver is undefined at the current state."""


class NoMaximizerError(RcbfSimError):
    """Raised when the propagated constraint is still increasing at the horizon."""


class AmbiguousMaximizerError(RcbfSimError):
    """Raised when more than one nonzero maximizer ties for the global maximum."""


class PropagationError(RcbfSimError):
    """Raised when the evading trajectory cannot be propagated."""


class PreconditionError(RcbfSimError):
    """Raised when a construction is used outside its stated assumptions."""


class EmptySampleSetError(RcbfSimError):
    """Raised when a sample set has no states inside the safe set."""


class ScenarioError(RcbfSimError):
    """Raised for invalid scenario files or configurations."""


class SafetyViolationError(RcbfSimError):
    """Raised in assert mode when a keep-out constraint is violated."""


class StepError(RcbfSimError):
    """Wraps an error raised while processing one control step."""

    def __init__(self, step: int, t: float, cause: Exception) -> None:
        super().__init__(f"step {step} (t={t:.6g} s): {type(cause).__name__}: {cause}")
        self.step = step
        self.t = t
        self.cause = cause

    def __reduce__(self):
        return (type(self), (self.step, self.t, self.cause))

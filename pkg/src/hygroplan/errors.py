"""Exception hierarchy shared by all modules."""


class DomainError(ValueError):
    """An argument is outside the physically or numerically admissible range."""


class InvariantViolation(DomainError):
    """A constructed object breaks one of its declared physical invariants."""


class SolverFailure(RuntimeError):
    """The time integrator could not continue (step-size underflow).

    ``last_time`` carries the last time (in seconds) for which a valid
    solution state exists.
    """

    def __init__(self, message, last_time=None):
        super().__init__(message)
        self.last_time = last_time


class EstimationError(RuntimeError):
    """Parameter estimation could not produce a usable result."""


class DegenerateSensitivityError(DomainError):
    """The sensitivity is zero, so the parameter is locally unidentifiable."""

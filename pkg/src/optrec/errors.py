"""Exception hierarchy shared by every module."""


class OptRecError(Exception):
    """Base class for all errors raised by optrec."""


class InvalidInput(OptRecError, ValueError):
    """Malformed or inconsistent input (dimensions, ranges, schema)."""


class InfeasibleData(OptRecError):
    """The data vector is not consistent with the model and noise sets."""


class SolverFailure(OptRecError):
    """The conic solver did not return a certified optimum."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class InternalInconsistency(OptRecError):
    """A certificate came out in the wrong direction beyond numerical noise."""


class Uncertified(OptRecError):
    """A result exists but its optimality certificate did not reach the requested tolerance."""

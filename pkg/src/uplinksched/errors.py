"""Exception hierarchy shared by every module."""


class SchedulingError(Exception):
    """Base class for all errors raised by :mod:`uplinksched`."""

    kind = "error"


class ParameterError(SchedulingError, ValueError):
    kind = "parameter"


class InfeasibleGroupError(SchedulingError):
    """A group cannot be served by the chosen receiver (e.g. ZF with K >= M)."""

    kind = "infeasible-group"


class NoFeasiblePartitionError(SchedulingError):
    """No exact cover of the users by positive-rate groups exists."""

    kind = "no-feasible-partition"


class DivergenceError(SchedulingError):
    kind = "divergence"


class DomainError(SchedulingError, ValueError):
    kind = "domain"


class InvariantViolation(SchedulingError, AssertionError):
    """An internal guarantee did not hold. Always a bug, never user error."""

    kind = "invariant"

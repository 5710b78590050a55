from __future__ import annotations


class ChaosTailsError(Exception):
    """Base class; `exit_code` is the CLI status the error maps to."""

    exit_code = 1


class InvalidParameter(ChaosTailsError, ValueError):
    exit_code = 2


class InvalidTail(InvalidParameter):
    pass


class DimensionMismatch(InvalidParameter):
    pass


class NonMonotoneMoments(InvalidParameter):
    pass


class Divergent(ChaosTailsError):
    """The tail decays too slowly for the requested moment integral."""

    exit_code = 3


class Unbounded(ChaosTailsError):
    exit_code = 3


class AllProjectionsZero(ChaosTailsError):
    exit_code = 3


class NonSummable(ChaosTailsError):
    exit_code = 3


class MissingMoments(ChaosTailsError):
    exit_code = 3


class AssumptionViolated(ChaosTailsError):
    exit_code = 3


class TooLarge(ChaosTailsError):
    exit_code = 4

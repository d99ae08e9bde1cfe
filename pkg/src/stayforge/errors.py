"""Exception hierarchy.

Every error carries the process exit code the CLI reports for it:
1 for domain errors (degenerate data, invalid parameters), 2 for I/O and
parse errors, 3 for internal invariant violations.
"""

from __future__ import annotations


class StayforgeError(Exception):
    exit_code = 3


class DomainError(StayforgeError):
    exit_code = 1


class DataIOError(StayforgeError):
    exit_code = 2


class InvariantViolation(StayforgeError):
    exit_code = 3


# data model
class EmptyInputError(DomainError):
    pass


class SchemaConflictError(DomainError):
    pass


class InvalidFractionError(DomainError):
    pass


class DegenerateSplitError(DomainError):
    pass


class MissingValueError(DomainError):
    """Arithmetic was attempted on a MISSING cell."""


# preprocessing
class InvalidDateError(DomainError):
    pass


class NegativeStayError(DomainError):
    pass


class UnimputableColumnError(DomainError):
    pass


# resampling
class DegenerateClassBalanceError(DomainError):
    pass


class InsufficientMinorityError(DomainError):
    pass


# neural net
class InvalidActivationError(DomainError):
    pass


class ShapeError(DomainError):
    pass


class NumericalError(DomainError):
    pass


# hyperparameter search
class InvalidConfigError(DomainError):
    pass


class SurrogateFailureError(DomainError):
    pass


# evaluation
class UndefinedAUCError(DomainError):
    pass


class InsufficientDimensionsError(DomainError):
    pass


# synthetic data
class InvalidSpecError(DomainError):
    pass


# file formats
class ParseError(DataIOError):
    pass


class SchemaMismatchError(DataIOError):
    pass


class CheckpointMismatchError(DataIOError):
    pass

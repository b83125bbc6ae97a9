"""Exception hierarchy shared across the package.

Three families map onto the CLI exit codes: ``ConfigError`` (usage, exit 2),
``DataError`` (malformed inputs, exit 3), and ``DomainError`` (numeric or
statistical preconditions, exit 4).
"""

from __future__ import annotations


class ValdesignError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ValdesignError):
    """Bad configuration: unknown keys, missing required settings."""


class DataError(ValdesignError):
    """Malformed input files: missing columns, unparsable cells."""


class DomainError(ValdesignError):
    """Violated numeric or statistical precondition."""


# --- numeric kernels ---------------------------------------------------------

class NotSymmetric(DomainError):
    pass


class NotPositiveDefinite(DomainError):
    def __init__(self, message: str, pivot_index: int | None = None):
        super().__init__(message)
        self.pivot_index = pivot_index


class ConvergenceFailure(DomainError):
    pass


class NonFiniteValue(DomainError):
    pass


class ConstantColumn(DomainError):
    def __init__(self, column: int):
        super().__init__(f"column {column} has zero sample standard deviation")
        self.column = column


class DimensionMismatch(DomainError):
    pass


# --- random variates ---------------------------------------------------------

class InvalidProbability(DomainError):
    pass


class InvalidParameter(DomainError):
    pass


# --- regression --------------------------------------------------------------

class RankDeficient(DomainError):
    def __init__(self, column: int):
        super().__init__(f"design matrix is rank deficient at column {column}")
        self.column = column


class TooFewRows(DomainError):
    pass


class InvalidLevel(DomainError):
    pass


# --- designs -----------------------------------------------------------------

class SizeExceedsPopulation(DomainError):
    pass


# --- imputation --------------------------------------------------------------

class MissingDesignArtifact(DomainError):
    pass


class TooFewValidated(DomainError):
    pass


class MissingPredictor(DomainError):
    pass


class TooFewImputations(DomainError):
    pass


# --- simulation --------------------------------------------------------------

class EmptyCell(DomainError):
    pass


class ReplicateFailureRate(DomainError):
    """More than the tolerated share of replicates failed."""


# --- study pipeline ----------------------------------------------------------

class MissingColumn(DataError):
    pass


class NonNumericCell(DataError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"cell at row {row}, column {column!r} is not numeric: {value!r}")
        self.row = row
        self.column = column
        self.value = value


class InvalidRule(DomainError):
    pass

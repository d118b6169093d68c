"""Exception hierarchy.

Every error belongs to one of three families that map onto CLI exit codes:
configuration problems (1), bad input data (2) and failures inside a
pipeline stage (3).
"""


class StackcastError(Exception):
    exit_code = 3


class ConfigError(StackcastError):
    exit_code = 1


class DataError(StackcastError):
    exit_code = 2


class StageError(StackcastError):
    """A pipeline stage failed; wraps the underlying error with stage context."""

    exit_code = 3

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


# market data
class MissingColumn(DataError):
    def __init__(self, column):
        super().__init__(f"required column {column!r} is missing")
        self.column = column


class UnparseableRow(DataError):
    def __init__(self, line, reason=""):
        msg = f"row {line} could not be parsed"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)
        self.line = line


class NonMonotonicDates(DataError):
    pass


class EmptyFile(DataError):
    pass


class EmptySeries(DataError):
    pass


class BoundaryOutOfRange(DataError):
    pass


# indicators / feature matrix
class WindowTooLarge(DataError):
    pass


class SeriesTooShort(DataError):
    pass


class DuplicateColumnName(DataError):
    pass


# preprocessing / prediction
class EmptyMatrix(DataError):
    pass


class ColumnMismatch(DataError):
    pass


class ModelFeatureMismatch(ColumnMismatch):
    pass


# learners and selection
class NonFiniteInput(DataError):
    pass


class TooFewRows(DataError):
    pass


class TooFewFeatures(DataError):
    pass


class DidNotConverge(UserWarning):
    """Issued as a warning: the solver hit its iteration cap and the model is still returned."""


# evaluation
class LengthMismatch(DataError):
    pass


class ZeroActualForMape(DataError):
    pass


class ConstantActualForR2(DataError):
    pass

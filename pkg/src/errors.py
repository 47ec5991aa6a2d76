"""Errors raised across the pipeline.

Each error belongs to a category, and each category maps to a distinct
process exit code (see `main.py`).
"""


class MLMError(Exception):
    exit_code = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.stage: str | None = None

    def __str__(self) -> str:
        message = super().__str__()
        if self.stage is None:
            return message
        return f"[{self.stage}] {message}"


class ConfigError(MLMError):
    exit_code = 2


class DataError(MLMError):
    exit_code = 3


class FitError(MLMError):
    exit_code = 4


class DocumentError(MLMError):
    exit_code = 5


class InterpretError(MLMError):
    exit_code = 6


# Configuration.
class BadJ(ConfigError):
    pass


class FoldTooSmall(ConfigError):
    pass


class FractionOutOfRange(ConfigError):
    pass


# Data.
class MissingTarget(DataError):
    pass


class RaggedRows(DataError):
    def __init__(self, row: int, expected: int, found: int):
        super().__init__(f"Row {row} has {found} fields, expected {expected}.")
        self.row = row


class UnparseableCell(DataError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"Cannot parse cell {value!r} at row {row}, column {column!r}.")
        self.row = row
        self.column = column


class EmptyFile(DataError):
    pass


class SingleLevelColumn(DataError):
    def __init__(self, name: str):
        super().__init__(f"Nominal column {name!r} has a single level.")
        self.name = name


class SchemaMismatch(DataError):
    def __init__(self, missing: list[str], extra: list[str], message: str = ""):
        details = message or f"missing columns {missing}, unexpected columns {extra}"
        super().__init__(f"Input does not match the training schema: {details}.")
        self.missing = missing
        self.extra = extra


class DimensionMismatch(DataError):
    def __init__(self, expected: int, found: int):
        super().__init__(f"Expected inputs of dimension {expected}, got {found}.")


# Fitting.
class DivergedLoss(FitError):
    pass


class DegenerateComponent(FitError):
    pass


class TooFewPoints(FitError):
    pass


class EmptyCell(FitError):
    pass


class SeparableDegenerate(FitError):
    pass


class NotConverged(FitError):
    pass


# Persistence.
class VersionMismatch(DocumentError):
    pass


class CorruptDocument(DocumentError):
    pass


# Interpretation.
class EmptySubset(InterpretError):
    pass


class IndexOutOfRange(InterpretError):
    pass


class EmptyEpic(InterpretError):
    pass


class UnknownEpic(InterpretError):
    pass


class NoStderr(InterpretError):
    pass

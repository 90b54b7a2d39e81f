"""Exception hierarchy shared across the package."""


class PolarmlError(Exception):
    """Base class for all package errors."""


class DataError(PolarmlError, ValueError):
    """Malformed or invalid input table.

    ``path``, ``row`` and ``column`` locate the problem when known; ``row`` is
    the 1-based line number in the source file.
    """

    def __init__(self, message, path=None, row=None, column=None):
        self.path = path
        self.row = row
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"line {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{': '.join([', '.join(where), message])}"
        super().__init__(message)


class SchemaError(DataError):
    """Column layout differs from the expected schema."""


class CorrelationError(PolarmlError, ValueError):
    """Correlation is undefined for the given input (length mismatch, constant vector)."""


class DegenerateTestError(PolarmlError, ValueError):
    """A hypothesis test has no defined statistic for the given input."""


class SingularMatrixError(PolarmlError, ValueError):
    def __init__(self, message, dependent_columns=()):
        self.dependent_columns = list(dependent_columns)
        super().__init__(message)


class ConvergenceError(PolarmlError, RuntimeError):
    def __init__(self, message, worst_violation=None):
        self.worst_violation = worst_violation
        super().__init__(message)


class TrainingDivergedError(PolarmlError, RuntimeError):
    def __init__(self, message, epoch):
        self.epoch = epoch
        super().__init__(message)

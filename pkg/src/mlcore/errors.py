"""Exception types shared across mlcore."""


class MlcoreError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(MlcoreError, ValueError):
    """Two inputs disagree on dimensionality."""

    def __init__(self, left, right, what="points"):
        self.left = left
        self.right = right
        super().__init__(
            f"dimension mismatch between {what}: {left} vs {right}"
        )


class DataFormatError(MlcoreError, ValueError):
    """Malformed or invalid dataset contents."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = ""
        if row is not None:
            where = f" (row {row}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class InvalidParameter(MlcoreError, ValueError):
    """A parameter violates an operation's precondition."""

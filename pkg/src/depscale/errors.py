"""Exception hierarchy shared by every stage.

The CLI maps these onto exit statuses: missing inputs -> 2,
validation failures -> 3, numeric failures -> 4.
"""


class DepscaleError(Exception):
    """Base class for all package errors."""


class MissingInputError(DepscaleError, FileNotFoundError):
    """A referenced file or stage artifact does not exist."""

    def __init__(self, path, what="input"):
        self.path = str(path)
        super().__init__(f"missing {what}: {self.path}")


class ValidationError(DepscaleError, ValueError):
    """Input data violates a documented precondition."""


class ParseError(ValidationError):
    """A file could not be parsed.  ``row`` is 1-based when known."""

    def __init__(self, message, path=None, row=None):
        self.path = None if path is None else str(path)
        self.row = row
        where = []
        if self.path is not None:
            where.append(self.path)
        if row is not None:
            where.append(f"row {row}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class SessionMismatchError(ValidationError):
    """Two session collections that must align do not."""

    def __init__(self, only_left, only_right):
        self.only_left = sorted(only_left)
        self.only_right = sorted(only_right)
        super().__init__(
            "session ids differ; only in first: "
            f"{self.only_left}; only in second: {self.only_right}"
        )

    @property
    def symmetric_difference(self):
        return sorted(set(self.only_left) | set(self.only_right))


class NumericalError(DepscaleError, ArithmeticError):
    """A numeric routine produced NaN/inf or failed to make progress."""

"""Exception hierarchy shared by the library and the CLI."""


class PmbrError(Exception):
    """Base class for all errors raised by this package."""


class InputError(PmbrError, ValueError):
    """Malformed input: bad file records, out-of-range indices, invalid parameters."""


class UtilityError(PmbrError):
    """A utility function failed while scoring a specific matrix cell."""

    def __init__(self, row: int, col: int, cause: BaseException):
        super().__init__(f"utility failed at cell ({row}, {col}): {cause!r}")
        self.row = row
        self.col = col
        self.cause = cause


class NumericalError(PmbrError, ArithmeticError):
    """Non-finite values or a failed linear solve inside the completion solver."""


class SingularSystemError(NumericalError):
    def __init__(self, axis: str, index: int):
        super().__init__(f"singular normal equations for {axis} {index} (lambda = 0?)")
        self.axis = axis
        self.index = index

"""Exception hierarchy shared by every module."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class DomainError(ValidationError):
    """Argument outside the domain of a special function or reduction."""


class FormatError(ValidationError):
    """Malformed tensor file.

    Parameters
    ----------
    message : str
        Human readable description.
    offset : int
        Byte offset at which parsing failed.
    """

    def __init__(self, message, offset=0):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class NumericalError(ArithmeticError):
    """A non-finite value appeared during an iterative computation."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point

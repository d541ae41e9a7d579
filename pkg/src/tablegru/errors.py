class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's preconditions."""


class NumericError(ArithmeticError):
    """Raised when a computation produces non-finite values."""

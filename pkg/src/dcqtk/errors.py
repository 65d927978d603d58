"""Exception types shared across the toolkit."""


class DcqError(Exception):
    """Base class for all toolkit errors."""


class ArgumentError(DcqError, ValueError):
    """An argument is out of range or has the wrong shape."""


class CapacityError(DcqError):
    """A configured size limit (qubit cap, precision range) would be exceeded."""


class ValidationError(DcqError, ValueError):
    """A value fails a structural invariant (Hermiticity, completeness, ...)."""


class DegeneracyError(DcqError, ValueError):
    """A vector family is numerically linearly dependent."""


class DecodeError(DcqError, ValueError):
    """A string cannot be decoded in the requested format."""


class ParseError(DcqError, ValueError):
    """A program text or bit string is not a well-formed instruction list."""


class FormatError(DcqError, ValueError):
    """A program produced output in an unexpected format."""


class BudgetExhausted(DcqError):
    """A bounded search ran out of budget before reaching a verdict."""

    def __init__(self, message="budget exhausted", spent=None):
        super().__init__(message)
        self.spent = spent

from typing import Optional


class NBMarkovError(Exception):
    """Base class for errors raised by nbmarkov."""


class DomainError(NBMarkovError, ValueError):
    """An argument lies outside the domain of the operation."""


class TruncationError(NBMarkovError, RuntimeError):
    """A transition row would need more support points than MAX_SUPPORT allows."""


class AccuracyError(NBMarkovError, ArithmeticError):
    """Numerical inversion cannot reach the requested accuracy."""


class SeriesFormatError(DomainError):
    """A count series file is malformed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConvergenceFailure(NBMarkovError, RuntimeError):
    """The optimizer stopped before reaching its tolerance."""

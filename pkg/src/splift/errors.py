"""Exception hierarchy shared by all modules."""


class SpliftError(Exception):
    """Base class for every error raised by this package."""


class ParseError(SpliftError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(SpliftError, ValueError):
    pass


class ContractError(SpliftError, ValueError):
    """Arguments violate a documented precondition (shapes, ranges)."""


class BoundsError(SpliftError, IndexError):
    pass


class NotFoundError(SpliftError, LookupError):
    pass


class NumericalError(SpliftError, ArithmeticError):
    """A non-finite value appeared during an iterative computation."""

    def __init__(self, message, iteration=None, trace=None):
        self.iteration = iteration
        self.trace = trace
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)

"""Exception types raised across the package."""


class STLError(Exception):
    """Base class for all package errors."""


class InvalidInput(STLError, ValueError):
    """Input has the wrong shape, contains non-finite values, or breaks a precondition."""


class EmptyInput(InvalidInput):
    """Input has no samples, or too few to form the requested structure."""


class DegenerateInput(InvalidInput):
    """Input is well-formed but carries no usable spread (e.g. all points identical)."""


class ParseError(InvalidInput):
    """A data file could not be parsed.

    Parameters
    ----------
    message : str
        Human-readable description.
    line : int, optional
        1-based line number in the offending file.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalFailure(STLError, ArithmeticError):
    """An eigensolver or other numerical routine failed.

    ``iteration`` is set by the pipeline when the failure happens inside
    the refinement loop.
    """

    def __init__(self, message, iteration=None):
        self.iteration = iteration
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)

"""Exception types raised across the package."""


class QadwhError(Exception):
    """Base class for all package errors."""


class DimensionError(QadwhError, ValueError):
    """Array shapes or sizes are inconsistent."""


class NoLabelError(QadwhError, ValueError):
    """A label vector has no positive entry."""


class SamplingError(QadwhError, RuntimeError):
    """No valid triplet could be drawn."""


class NumericError(QadwhError, ArithmeticError):
    """A loss or gradient evaluated to a non-finite value."""


class DivergenceError(NumericError):
    """Training produced a non-finite loss or parameter."""

    def __init__(self, step, message="non-finite value"):
        self.step = step
        super().__init__(f"diverged at step {step}: {message}")


class RangeError(QadwhError, IndexError):
    """An index or cutoff lies outside its valid range."""


class ParseError(QadwhError, ValueError):
    """A file or config could not be parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class EmptyInputError(QadwhError, ValueError):
    """An aggregate was requested over no inputs."""

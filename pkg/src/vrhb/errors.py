"""Exception types raised across the package.

Bad arguments raise plain ``ValueError``; the classes below cover the
numerical and capacity failures callers may want to catch separately.
"""


class NumericError(ArithmeticError):
    """A vector norm underflowed, overflowed or became non-finite."""


class DivergenceError(NumericError):
    """An iterate blew up during a solver run."""

    def __init__(self, message, epoch=None, iteration=None):
        super().__init__(message)
        self.epoch = epoch
        self.iteration = iteration


class RegimeError(ValueError):
    """A closed form was requested outside the parameter regime it covers."""


class CapacityError(RuntimeError):
    """Exact enumeration would be too large to carry out."""


class DegenerateSpectrumError(ValueError):
    """The top two eigenvalues are (numerically) equal."""


class LibsvmParseError(ValueError):
    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class NoViableStepSizeError(RuntimeError):
    """Every step size in a grid search diverged."""

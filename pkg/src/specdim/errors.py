"""Exception hierarchy shared by every module."""


class SpecDimError(Exception):
    """Base class for library errors."""


class InvalidArgumentError(SpecDimError, ValueError):
    """An input violates a documented precondition."""


class NumericError(SpecDimError, ArithmeticError):
    """A computation produced a zero, infinite or NaN value where one is not allowed."""


class ConvergenceError(NumericError):
    """The tridiagonal eigensolver hit its iteration cap.

    Attributes
    ----------
    index : int
        Position of the eigenvalue that failed to converge.
    """

    def __init__(self, index, iterations):
        super().__init__(
            f"eigenvalue {index} did not converge within {iterations} QL iterations"
        )
        self.index = index
        self.iterations = iterations

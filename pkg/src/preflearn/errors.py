"""Exception types shared across the package."""


class PreflearnError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(PreflearnError, ValueError):
    """An argument violates a documented precondition."""


class DimensionMismatchError(InvalidArgumentError):
    """Array shapes that must agree do not."""


class SingularEvaluationError(PreflearnError, ArithmeticError):
    """A formula was evaluated at a point where it is undefined (log of 0)."""


class SingularMatrixError(PreflearnError, ArithmeticError):
    """A matrix that must be inverted is singular or numerically so."""


class ConvergenceError(PreflearnError):
    """An iterative solver hit its iteration cap.

    The best iterate found is attached as ``best`` so callers can inspect
    or accept it anyway.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class UnsupportedChannelError(PreflearnError):
    """The channel does not satisfy the requirements of the operation."""


class InfeasibleTargetError(PreflearnError):
    """The requested predictive distribution cannot be realized geometrically."""


class ConstructionError(PreflearnError):
    """A geometric construction failed (degenerate feasible region)."""


class InitializationError(PreflearnError):
    """No valid starting point could be found for the sampler."""


class IngestionError(PreflearnError):
    """A catalog file failed validation.

    ``line_numbers`` lists the offending 1-based lines when applicable.
    """

    def __init__(self, message, line_numbers=()):
        super().__init__(message)
        self.line_numbers = tuple(line_numbers)

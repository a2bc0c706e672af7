"""Exception hierarchy shared across the package."""


class WeakAlignError(Exception):
    """Base class for all package errors."""


class ArgumentError(WeakAlignError, ValueError):
    pass


class DimensionError(WeakAlignError, ValueError):
    pass


class DegenerateVectorError(WeakAlignError, ValueError):
    pass


class PermutationError(WeakAlignError, ValueError):
    pass


class ShapeError(WeakAlignError, ValueError):
    pass


class SizeError(WeakAlignError, ValueError):
    pass


class NumericError(WeakAlignError, ArithmeticError):
    pass


class StateError(WeakAlignError, RuntimeError):
    pass


class TrainingDivergedError(WeakAlignError, RuntimeError):
    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"loss became non-finite at step {step}")


class FormatError(WeakAlignError, ValueError):
    """Malformed input file; message names the file and line."""

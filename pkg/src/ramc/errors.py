"""Exception types shared across the package.

Every error raised on a contract violation derives from RamcError so
callers can distinguish library failures from programming mistakes.
"""


class RamcError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(RamcError, ValueError):
    """Operands have incompatible or invalid dimensions."""


class MatrixSizeError(RamcError, ValueError):
    """A result would exceed the configured maximum element count."""


class SolverFailureError(RamcError, RuntimeError):
    """An iterative kernel failed to converge.

    Attributes
    ----------
    iterations : int
        Iteration budget that was exhausted when the failure was raised.
    """

    def __init__(self, message, iterations=0):
        super().__init__(message)
        self.iterations = iterations


class DegenerateSystemError(RamcError, ValueError):
    """A linear system or selected sub-dictionary is rank deficient.

    Attributes
    ----------
    rank : int
        Numerical rank that triggered the failure.
    """

    def __init__(self, message, rank=0):
        super().__init__(message)
        self.rank = rank


class GridMismatchError(RamcError, ValueError):
    """A ray angle does not coincide with any dictionary grid point."""


class InfeasibleMaskError(RamcError, ValueError):
    """A sampling mask cannot satisfy row/column coverage requirements."""


class ColdStartError(RamcError, RuntimeError):
    """A rank tracker has too little history to form a prediction."""


class ConfigError(RamcError, ValueError):
    """A configuration document or value is invalid."""


class UndefinedMetricError(RamcError, ValueError):
    """A metric is undefined for the given inputs (e.g. zero reference)."""

"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Qubit count or array shape is invalid or inconsistent."""


class DecompositionError(ValueError):
    """Cholesky factorisation failed even after regularisation."""


class DegenerateParameterError(ValueError):
    """A tau vector is all zeros and cannot be normalised."""


class OptimizationError(RuntimeError):
    """Every MLE restart produced a non-finite objective."""


class LineSearchStalled(RuntimeError):
    """BFGS could not find an acceptable step too many times in a row.

    The last iterate is kept on the exception so callers can still use it.
    """

    def __init__(self, message, x=None, f_value=None, iterations=0):
        super().__init__(message)
        self.x = x
        self.f_value = f_value
        self.iterations = iterations


class UnsupportedFormatError(ValueError):
    """File declares a format version this package does not read."""


class ParseError(ValueError):
    """File content is malformed."""


class CorruptCheckpointError(ValueError):
    """Model checkpoint is truncated or internally inconsistent."""

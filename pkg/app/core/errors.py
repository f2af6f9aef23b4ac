class QkaError(Exception):
    """Base class for every failure raised by the pipeline."""

    exit_code = 1


class ConfigError(QkaError):
    exit_code = 2


class DataError(QkaError):
    exit_code = 3


class ShapeError(DataError, ValueError):
    """Operands with incompatible dimensions."""


class NumericalError(QkaError):
    exit_code = 4


class NonFiniteError(NumericalError, ValueError):
    pass


class AsymmetricMatrixError(NumericalError, ValueError):
    pass


class NotPositiveDefiniteError(NumericalError):
    """Cholesky met a pivot <= 0; the caller is expected to regularize."""


class SpsaDivergenceError(NumericalError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class StageError(QkaError):
    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = exit_code_for(cause)


def exit_code_for(error):
    """Process exit code for an exception; I/O failures count as data errors."""
    if isinstance(error, QkaError):
        return error.exit_code
    if isinstance(error, OSError):
        return DataError.exit_code
    return NumericalError.exit_code

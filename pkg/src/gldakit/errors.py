class GldakitError(Exception):
    """Base class for all package errors."""


class DataValidationError(GldakitError):
    """Malformed input data, files, or configuration."""


class NumericalError(GldakitError):
    """Numerical failure (e.g. a Cholesky factorization that did not succeed)."""

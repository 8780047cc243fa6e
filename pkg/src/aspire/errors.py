"""Exception types shared across the package."""


class AspireError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(AspireError):
    """An array argument does not match the expected dimensions."""


class ConfigError(AspireError):
    """A configuration value is invalid or inconsistent."""


class NumericalError(AspireError):
    """A computation produced non-finite values or diverged."""


class FactorizationError(NumericalError):
    """A matrix factorization (Cholesky) failed even after jitter."""


class DegenerateInputError(AspireError):
    """Input is too degenerate for the requested statistic."""

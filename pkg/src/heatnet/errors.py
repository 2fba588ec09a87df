"""Exception hierarchy shared across the package."""


class HeatnetError(Exception):
    """Base class for all package errors."""


class DimensionError(HeatnetError, ValueError):
    """Point or array dimension does not match the problem dimension."""


class DomainError(HeatnetError, ValueError):
    """Argument outside the admissible domain (time, tau, probability...)."""


class SingularityError(HeatnetError, ArithmeticError):
    """Heat kernel evaluated at coincident space-time points."""


class NonFiniteError(HeatnetError, FloatingPointError):
    """Assembled matrix or vector contains NaN/inf entries."""


class SolverError(HeatnetError, ArithmeticError):
    """Linear solve failed (factorization or SVD)."""


class QuadratureError(HeatnetError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""


class ConfigError(HeatnetError, ValueError):
    """Invalid run configuration; message carries the offending key."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class ModelFormatError(HeatnetError, ValueError):
    """Model file is malformed, has the wrong version, or wrong fingerprint."""

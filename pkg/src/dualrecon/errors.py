"""Exception types shared across the library."""


class DualReconError(Exception):
    """Base class for library errors."""


class DimensionError(DualReconError, ValueError):
    """Operands live on incompatible grids or have mismatched sizes."""


class CapacityError(DualReconError, ValueError):
    """Requested more basis vectors than the grid can hold."""


class IllPosedConfigError(DualReconError, ValueError):
    """Regularization configuration leaves the problem rank-deficient."""


class BalanceDivisionError(DualReconError, ZeroDivisionError):
    """Balance update hit psi(u) + eta0 = 0; advise eta0 > 0."""


class FingerprintError(DualReconError, ValueError):
    """Banked controls do not match the requesting configuration."""


class ConfigError(DualReconError, ValueError):
    """Experiment configuration failed to parse or validate."""

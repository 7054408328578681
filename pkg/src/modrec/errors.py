"""Exception types used across the package."""


class GridError(ValueError):
    """Sampling grid is inconsistent (e.g. band fraction above one)."""


class FoldingError(ValueError):
    """Folding half-range must be strictly positive."""


class ZeroSignalError(ValueError):
    """Operation is undefined on an all-zero reference signal."""


class BandError(ValueError):
    """Frequency band is unrepresentable on the grid or outside Nyquist."""


class RateTooLowError(BandError):
    """Sampling rate leaves no exploitable spectral gap (or no valid
    difference order)."""


class DimensionError(ValueError):
    """Vector/operator shapes do not agree."""


class OrderOverflowError(ValueError):
    """Required difference order exceeds the configured safety cap."""


class ThresholdError(ValueError):
    """Shrinkage threshold must be nonnegative."""


class ConfigError(ValueError):
    """Mismatched or invalid configuration (e.g. folding ranges differ)."""


class CheckpointError(RuntimeError):
    """Model checkpoint is truncated, malformed or shape-incompatible."""


class MissingModelError(FileNotFoundError):
    """A benchmark cell requested a trained model that is not on disk."""

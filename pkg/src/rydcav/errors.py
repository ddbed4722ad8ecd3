"""Exception types shared across the package."""


class RydcavError(Exception):
    """Base class for errors raised by this package."""


class GridTooCoarseError(RydcavError, ValueError):
    """Time grid too coarse to resolve the requested dynamics."""


class CarrierMismatchError(RydcavError, ValueError):
    """Frequency axes of two inputs that must agree do not agree."""


class NoResolvablePeakError(RydcavError):
    """Spectrum has no peak that can be measured (flat or monotone data)."""


class SingularNormalMatrixError(RydcavError):
    """Weighted normal matrix is singular; the parameterization is degenerate."""


class ModelEvaluationError(RydcavError):
    """Model function returned non-finite values at the initial guess."""


class FlatSpectrumError(RydcavError):
    """Spectrum carries no signal above the noise floor; nothing to fit."""


class DataFormatError(RydcavError, ValueError):
    """Malformed dataset file; message carries the offending line number."""


class ConfigError(RydcavError, ValueError):
    """Missing or invalid configuration key; message names the key."""

"""Exception types shared across the package."""


class MaglocError(Exception):
    """Base class for all magloc errors."""


class DimensionError(MaglocError):
    """Inputs have incompatible lengths or shapes."""


class DegenerateInputError(MaglocError):
    """Input carries no usable signal (empty, zero-norm, or zero-energy)."""


class InvalidWindowError(MaglocError):
    """A window, radius, or subsequence length is unusable for the input."""


class DegenerateSpectrumError(MaglocError):
    """A spectral descriptor is undefined because the non-DC spectrum is all zero."""


class SchemaMismatchError(MaglocError):
    """Feature vectors do not share the schema expected by the consumer."""


class ConfigurationError(MaglocError):
    """A configuration value or combination is unsupported."""


class DataFormatError(MaglocError):
    """Input data violates the expected file schema."""


class VersionError(MaglocError):
    """A persisted artifact carries an unsupported format version."""


class LeakageError(MaglocError):
    """Train/test contamination detected by the evaluation guard."""


class TrainingDivergedError(MaglocError):
    """Iterative training aborted because the loss exploded."""

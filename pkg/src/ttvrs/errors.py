"""Exception types shared across the package."""


class TtvrsError(Exception):
    """Base class for all package errors."""


class ValidationError(TtvrsError):
    """Inputs violate a documented precondition or invariant."""


class ZeroNormError(ValidationError):
    """A zero-norm embedding reached a cosine-similarity computation.

    Zero-norm token embeddings indicate a broken encoder and must not be
    silently averaged into similarity weights.
    """


class ConfigError(TtvrsError):
    """Bad or inconsistent run configuration (CLI exit code 2)."""


class MissingArtifactError(TtvrsError):
    """A required on-disk artifact is absent (CLI exit code 3)."""


class NumericsError(TtvrsError):
    """A numeric failure such as a non-finite loss (CLI exit code 4)."""

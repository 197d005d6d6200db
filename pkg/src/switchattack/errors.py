"""Exception hierarchy shared across the package."""


class SwitchAttackError(Exception):
    """Base class for all package-specific errors."""


class ZeroGradient(SwitchAttackError):
    """An l2 normalization was requested for an all-zero vector."""


class ZeroVector(SwitchAttackError):
    """Cosine similarity was requested for a zero-norm vector."""


class ShapeMismatch(SwitchAttackError):
    """Two tensors that must share a shape do not."""


class IndexOutOfRange(SwitchAttackError):
    """A class index fell outside [0, K)."""


class NonFinite(SwitchAttackError):
    """Logits or pixels contained NaN or Inf."""


class DegenerateDimension(SwitchAttackError):
    """An operation needs at least a 2-dimensional ambient space."""


class BudgetExhausted(SwitchAttackError):
    """The per-image query budget has been consumed."""


class OracleFailure(SwitchAttackError):
    """Querying the target model failed (I/O error or bad output)."""


class MalformedResponse(OracleFailure):
    """A remote oracle returned a response that violates the wire format."""


class ConfigError(SwitchAttackError):
    """An attack or experiment configuration is invalid."""


class ManifestError(SwitchAttackError):
    """A dataset manifest is missing fields or malformed."""


class SizeMismatch(ManifestError):
    """The raw data file size disagrees with the manifest."""


class LabelOutOfRange(ManifestError):
    """A manifest label is not a valid class index."""


class DegenerateClusters(SwitchAttackError):
    """Synthetic data generation could not produce enough correctly
    classified samples within the retry cap."""

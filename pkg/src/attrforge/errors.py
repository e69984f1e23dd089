"""Exception hierarchy shared across the toolkit.

Exit-code mapping used by the CLI: validation errors -> 2, I/O errors -> 3,
anything else escaping to the top level -> 4.
"""


class AttrForgeError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(AttrForgeError):
    """Bad arguments, malformed configs, violated preconditions."""


class IoError(AttrForgeError):
    """File reading/writing failures."""


class SingularTransform(ValidationError):
    """Affine matrix whose 2x2 block is not invertible."""


class EmptyMask(ValidationError):
    """Mask with no pixel above the 0.5 object threshold."""


class EmptyBackground(ValidationError):
    """Mask covering (nearly) the whole frame; nothing to condition on."""


class StepOutOfRange(ValidationError):
    """Diffusion step index outside the schedule."""


class EmptyDataset(ValidationError):
    """Empirical denoiser constructed without data."""


class EmptyPool(ValidationError):
    """Background replacement requested with an empty image pool."""


class InvalidScale(ValidationError):
    """Non-positive resize scale."""


class InvalidLabel(ValidationError):
    """Class index outside the classifier's range."""


class BadOffset(ValidationError):
    """Zero co-occurrence offset."""


class DimensionMismatch(ValidationError):
    """Feature statistics of different dimensionality."""


class NotPSD(ValidationError):
    """Covariance with eigenvalues below the clipping floor."""


class DegenerateDataset(ValidationError):
    """Training set with fewer than 2 classes or 2 examples per class."""


class MissingVariant(AttrForgeError):
    """Manifest entry whose variant file is absent (recorded, not fatal)."""

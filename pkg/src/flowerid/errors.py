"""Exception hierarchy shared across the toolkit."""


class FlowerIdError(Exception):
    """Base class for all toolkit errors."""


# --- imaging ---

class IoError(FlowerIdError):
    """File missing or unreadable."""


class DecodeError(FlowerIdError):
    """Image bytes corrupt or in an unsupported format."""


class EmptyResult(FlowerIdError):
    """Morphological cleanup removed every object pixel."""


class DegenerateShape(FlowerIdError):
    """Shape too small or flat for the requested descriptor."""


class DimensionMismatch(FlowerIdError):
    """Array shapes disagree where they must match."""


# --- segmentation ---

class EmptyRegion(FlowerIdError):
    """Region has no pixels."""


class InvalidMarkers(FlowerIdError):
    """Marker strokes are contradictory or one side is empty."""


class NoObject(FlowerIdError):
    """Merging eliminated the object seeds (should be impossible)."""


# --- features ---

class TooFewBoundaryPoints(FlowerIdError):
    """Contour too short for percentile-based descriptors."""


class EmptyMask(FlowerIdError):
    """Mask contains no object pixels."""


# --- classifier ---

class SingleClass(FlowerIdError):
    """Binary training requires both labels present."""


class NonFinite(FlowerIdError):
    """Input rows contain NaN or infinity."""


class InsufficientClasses(FlowerIdError):
    """Multiclass training requires at least two classes."""


class TooFewSamplesPerClass(FlowerIdError):
    """Stratified k-fold needs at least k samples in every class."""


class ConvergenceError(FlowerIdError):
    """SMO exceeded its update budget without satisfying KKT."""


# --- dataset store ---

class EmptyDataset(FlowerIdError):
    """No images found under the dataset root."""


class DuplicateImageId(FlowerIdError):
    """Two dataset entries share an image id."""


class InconsistentTaxonomy(FlowerIdError):
    """The same species name appears under two genera."""


class SchemaError(FlowerIdError):
    """Feature CSV or model file does not match the expected schema."""


class UnknownGroup(FlowerIdError):
    """Feature-group name not present in the registry."""


class UnsupportedClassCount(FlowerIdError):
    """Synthetic corpus supports at most 30 class templates."""

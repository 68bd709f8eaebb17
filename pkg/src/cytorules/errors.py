"""Exception types shared across the toolkit."""


class CytorulesError(Exception):
    """Base class for all toolkit errors."""


class ParseError(CytorulesError):
    """A manifest, cells file, or serialized artifact could not be parsed."""


class DimensionMismatch(CytorulesError):
    """Feature vectors disagree with the dataset-wide feature dimension."""


class DuplicateSlideId(CytorulesError):
    """Two slides in one dataset share a slide_id."""


class EmptyMask(CytorulesError):
    """A feature-map mask selects no positions."""


class InsufficientSlides(CytorulesError):
    """Too few labeled slides of the requested class for ensemble synthesis."""


class InvalidSpec(CytorulesError):
    """A planted-data spec violates its own constraints."""


class TooFewPoints(CytorulesError):
    """Not enough points to build a neighbor graph or embedding."""


class NotEnoughReferenceSlides(CytorulesError):
    """No slides of the embedding reference class in the training set."""


class NotFitted(CytorulesError):
    """Operation requires a fitted model."""


class NoPoints(CytorulesError):
    """An operation that needs at least one point received none."""


class EmptyTrainingSet(CytorulesError):
    """Condition mining requires at least two training rows."""


class DegenerateLabels(CytorulesError):
    """Training labels contain only one class."""


class TooFewPatients(CytorulesError):
    """Not enough patients in some class to split both ways."""


class UnknownSlide(CytorulesError):
    """Requested slide_id does not exist in the session."""


class BindFailure(CytorulesError):
    """The HTTP server could not bind its address."""


class ArtifactLoadError(CytorulesError):
    """Serialized pipeline artifacts are missing or inconsistent."""

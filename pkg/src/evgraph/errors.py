"""Exception types shared across the package."""


class EvgraphError(Exception):
    """Base class for all errors raised by this package."""


class SpanBoundsError(EvgraphError):
    """A token span falls outside its sentence."""


class DuplicateAnnotationError(EvgraphError):
    """The same event annotation appears more than once."""


class GraphValidationError(EvgraphError):
    """An event graph violates a structural invariant."""


class GraphDecodeError(EvgraphError):
    """A valid graph cannot be converted back to event mentions."""


class CorpusFormatError(EvgraphError):
    """A corpus or graph file is malformed; the message names the line."""


class AlignmentError(EvgraphError):
    """Predicted and gold corpora do not cover the same sentences."""


class CapacityError(EvgraphError):
    """A sentence has more gold nodes than the model has queries."""


class CheckpointError(EvgraphError):
    """A parameter checkpoint is unreadable, truncated, or inconsistent."""


class VocabularyMismatchError(EvgraphError):
    """Model label vocabulary does not cover the corpus ontology."""


class EmbeddingLookupError(EvgraphError):
    """External embedding file does not provide usable vectors."""

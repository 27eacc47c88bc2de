"""Event extraction as graph parsing.

Sentences become labeled-edge event graphs: a dummy top node points at
trigger nodes (edge label = event type), triggers point at argument nodes
(edge label = role), and every non-top node anchors to a token span.  The
package covers the full loop: corpus I/O and synthesis, graph encoding and
validation, a permutation-invariant neural parser trained with bipartite
matching, and span-based evaluation.
"""

from .corpus import (
    Corpus,
    CorpusStats,
    Ontology,
    compute_stats,
    gen_synthetic,
    infer_format,
    read_corpus,
    read_embeddings,
    read_graphs,
    read_ontology,
    write_corpus,
    write_embeddings,
    write_graphs,
)
from .errors import (
    AlignmentError,
    CapacityError,
    CheckpointError,
    CorpusFormatError,
    DuplicateAnnotationError,
    EmbeddingLookupError,
    EvgraphError,
    GraphDecodeError,
    GraphValidationError,
    SpanBoundsError,
    VocabularyMismatchError,
)
from .graphs import (
    Edge,
    EventGraph,
    EventMention,
    Node,
    Sentence,
    Span,
    ValidationResult,
    decode_graph,
    encode_graph,
    validate_graph,
)
from .model import (
    EventParser,
    ModelConfig,
    ParseOutput,
    match_targets,
    solve_assignment,
    training_loss,
)
from .scoring import (
    PRF,
    ScoreReport,
    format_report,
    presence_accuracy,
    score_all,
    score_arguments,
    score_triggers,
    span_matches,
)
from .training import (
    TrainConfig,
    TrainResult,
    evaluate_model,
    load_parser,
    predict_corpus,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Span",
    "Sentence",
    "EventMention",
    "Node",
    "Edge",
    "EventGraph",
    "ValidationResult",
    "encode_graph",
    "decode_graph",
    "validate_graph",
    "Corpus",
    "CorpusStats",
    "Ontology",
    "infer_format",
    "read_corpus",
    "write_corpus",
    "read_graphs",
    "write_graphs",
    "read_ontology",
    "read_embeddings",
    "write_embeddings",
    "gen_synthetic",
    "compute_stats",
    "PRF",
    "ScoreReport",
    "score_triggers",
    "score_arguments",
    "presence_accuracy",
    "score_all",
    "span_matches",
    "format_report",
    "ModelConfig",
    "ParseOutput",
    "EventParser",
    "match_targets",
    "solve_assignment",
    "training_loss",
    "TrainConfig",
    "TrainResult",
    "train",
    "evaluate_model",
    "predict_corpus",
    "load_parser",
    "EvgraphError",
    "SpanBoundsError",
    "DuplicateAnnotationError",
    "GraphValidationError",
    "GraphDecodeError",
    "CorpusFormatError",
    "AlignmentError",
    "CapacityError",
    "CheckpointError",
    "VocabularyMismatchError",
    "EmbeddingLookupError",
    "__version__",
]

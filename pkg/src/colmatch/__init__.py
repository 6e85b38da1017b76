"""colmatch: embedding-based column matching between databases."""

from .embedding import (
    ColumnEmbedding,
    EmptyColumnError,
    HashEmbedder,
    MetadataEmbeddings,
    ProviderError,
    RemoteEmbedder,
    embed_column,
    embed_metadata,
    embed_texts,
    hash_embed,
)
from .evaluation import (
    EvalResult,
    EvaluationError,
    GroundTruth,
    GroundTruthEntry,
    accuracy_at_k,
    load_ground_truth,
    render_results,
    scaling_experiment,
)
from .ingest import (
    ColumnProfile,
    ColumnRef,
    DatabaseHandle,
    DataType,
    IngestError,
    TableDescriptor,
    cast_value_to_text,
    infer_dtype,
    list_column_refs,
    load_database,
    profile_column,
    profile_database,
)
from .matcher import (
    MatchCandidate,
    MatchConfig,
    MatcherError,
    MatchMode,
    MatchReport,
    MissingEmbeddingError,
    cosine_similarity,
    match_columns,
    metadata_rerank,
    name_only_match,
    parse_report,
    report_to_json,
    threshold_filter,
    value_match_topk,
)
from .store import (
    CorruptRecordError,
    EmbeddingStore,
    KeyNotFoundError,
    ProviderMismatchError,
    StoreError,
)

__version__ = "0.1.0"

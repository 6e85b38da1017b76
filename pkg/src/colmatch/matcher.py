"""Top-k column matching.

Reference columns are matched against unknown-database columns by cosine
similarity of mean value embeddings. In metadata mode, candidates passing
a similarity threshold are re-ranked by the mean cosine of their column
name, data type, and table-name embeddings. A name-only baseline ranks by
column-name similarity alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .embedding import (
    ColumnEmbedding,
    DEFAULT_CHUNK_SIZE,
    EmptyColumnError,
    MetadataEmbeddings,
    Provider,
    embed_column,
    embed_metadata,
)
from .ingest import ColumnRef, DatabaseHandle, profile_column
from .store import EmbeddingStore

METADATA_FIELDS = ("CN", "DT", "TN")


class MatcherError(Exception):
    pass


class DimensionMismatchError(MatcherError):
    pass


class ZeroVectorError(MatcherError):
    pass


class MissingEmbeddingError(MatcherError):
    """Raised when required embeddings are absent and on-demand compute is off."""

    def __init__(self, missing_keys: Sequence[str]):
        self.missing_keys = sorted(missing_keys)
        super().__init__(
            "missing embeddings for: " + ", ".join(self.missing_keys)
        )


class MatchMode(str, Enum):
    VALUES_ONLY = "values_only"
    METADATA_RERANK = "metadata_rerank"
    NAME_ONLY = "name_only"


@dataclass(frozen=True)
class MatchConfig:
    k: int = 3
    threshold: float = 0.4
    mode: MatchMode = MatchMode.VALUES_ONLY

    def __post_init__(self) -> None:
        if self.k < 1:
            raise MatcherError("k must be >= 1")
        if not -1.0 <= self.threshold <= 1.0:
            raise MatcherError("threshold must be in [-1, 1]")


@dataclass(frozen=True)
class MatchCandidate:
    """One ranked entry in a result list.

    `value_score` holds the cosine of the active primary embedding: the
    mean value embedding in values/metadata modes, the name embedding in
    name-only mode. `metadata_score` is set only by metadata re-ranking.
    """

    target: ColumnRef
    value_score: float
    metadata_score: float | None
    contributing_fields: tuple[str, ...]
    rank: int


@dataclass(frozen=True)
class MatchEntry:
    reference: ColumnRef
    candidates: tuple[MatchCandidate, ...]
    fallback_used: bool


@dataclass(frozen=True)
class MatchReport:
    reference_db: str
    unknown_dbs: tuple[str, ...]
    config: MatchConfig
    matches: tuple[MatchEntry, ...]
    skipped: tuple[tuple[ColumnRef, str], ...] = field(default_factory=tuple)


def cosine_similarity(x: np.ndarray, y: np.ndarray) -> float:
    """Cosine of two vectors, clamped to [-1, 1] against float overshoot."""
    if x.shape != y.shape:
        raise DimensionMismatchError(f"dimension mismatch: {x.shape} vs {y.shape}")
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVectorError("cosine similarity is undefined for a zero vector")
    if np.array_equal(a, b):
        return 1.0
    return float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))


def value_match_topk(
    query: ColumnEmbedding, candidates: Sequence[ColumnEmbedding], k: int
) -> list[MatchCandidate]:
    """Rank candidates by cosine against the query mean; return the top k.

    Ties break ascending on (database, column name) so results are
    deterministic.
    """
    if not candidates:
        raise MatcherError("candidate list is empty")
    if k < 1:
        raise MatcherError("k must be >= 1")
    scored = [
        (cosine_similarity(query.mean, cand.mean), cand.ref) for cand in candidates
    ]
    scored.sort(key=lambda item: (-item[0], item[1].sort_key()))
    return [
        MatchCandidate(
            target=ref,
            value_score=score,
            metadata_score=None,
            contributing_fields=(),
            rank=rank,
        )
        for rank, (score, ref) in enumerate(scored[:k], start=1)
    ]


def threshold_filter(
    ranked: Sequence[MatchCandidate], threshold: float
) -> tuple[list[MatchCandidate], bool]:
    """Keep candidates scoring at or above the threshold.

    If nothing qualifies, fall back to the candidates tied at the maximum
    score (the per-column adaptive floor) and report that the fallback
    fired.
    """
    if not ranked:
        return [], False
    kept = [c for c in ranked if c.value_score >= threshold]
    if kept:
        return kept, False
    best = ranked[0].value_score
    return [c for c in ranked if c.value_score == best], True


def metadata_rerank(
    query_meta: MetadataEmbeddings,
    filtered: Sequence[tuple[MatchCandidate, MetadataEmbeddings]],
    k: int,
) -> list[MatchCandidate]:
    """Re-rank threshold survivors by metadata similarity.

    Each candidate's metadata score is the mean of its column-name, data
    type, and table-list cosines; the fields at or above that mean are
    reported as the match's contributing fields. Ties fall back to value
    score, then (database, column name).
    """
    if not filtered:
        raise MatcherError("no candidates to re-rank")
    rescored = []
    for cand, meta in filtered:
        sims = (
            cosine_similarity(query_meta.name_vec, meta.name_vec),
            cosine_similarity(query_meta.dtype_vec, meta.dtype_vec),
            cosine_similarity(query_meta.tables_vec, meta.tables_vec),
        )
        score = sum(sims) / 3.0
        fields = tuple(
            name for name, sim in zip(METADATA_FIELDS, sims) if sim >= score
        )
        rescored.append((score, fields, cand))
    rescored.sort(key=lambda item: (-item[0], -item[2].value_score, item[2].target.sort_key()))
    return [
        MatchCandidate(
            target=cand.target,
            value_score=cand.value_score,
            metadata_score=score,
            contributing_fields=fields,
            rank=rank,
        )
        for rank, (score, fields, cand) in enumerate(rescored[:k], start=1)
    ]


def name_only_match(
    query_meta: MetadataEmbeddings, candidates: Sequence[MetadataEmbeddings], k: int
) -> list[MatchCandidate]:
    """Baseline: rank purely by cosine of column-name embeddings."""
    if not candidates:
        raise MatcherError("candidate list is empty")
    scored = [
        (cosine_similarity(query_meta.name_vec, meta.name_vec), meta.ref)
        for meta in candidates
    ]
    scored.sort(key=lambda item: (-item[0], item[1].sort_key()))
    return [
        MatchCandidate(
            target=ref,
            value_score=score,
            metadata_score=None,
            contributing_fields=("CN",),
            rank=rank,
        )
        for rank, (score, ref) in enumerate(scored[:k], start=1)
    ]


EmbeddedColumn = tuple[ColumnEmbedding, MetadataEmbeddings]


def match_one(
    query: EmbeddedColumn, candidates: Sequence[EmbeddedColumn], config: MatchConfig
) -> tuple[list[MatchCandidate], bool]:
    """Match a single reference column against a candidate pool."""
    query_emb, query_meta = query
    if config.mode is MatchMode.VALUES_ONLY:
        return value_match_topk(query_emb, [c for c, _ in candidates], config.k), False
    if config.mode is MatchMode.NAME_ONLY:
        return name_only_match(query_meta, [m for _, m in candidates], config.k), False

    ranked = value_match_topk(query_emb, [c for c, _ in candidates], len(candidates))
    kept, fallback = threshold_filter(ranked, config.threshold)
    meta_by_key = {meta.ref.key(): meta for _, meta in candidates}
    pairs = [(cand, meta_by_key[cand.target.key()]) for cand in kept]
    return metadata_rerank(query_meta, pairs, config.k), fallback


def assemble_report(
    reference_db: str,
    unknown_dbs: Sequence[str],
    config: MatchConfig,
    queries: Sequence[EmbeddedColumn],
    candidates: Sequence[EmbeddedColumn],
    skipped: Iterable[tuple[ColumnRef, str]] = (),
) -> MatchReport:
    """Run `match_one` for every query and collect a report."""
    if not candidates:
        raise MatcherError("no candidate columns available in unknown databases")
    matches = []
    for query in queries:
        ranked, fallback = match_one(query, candidates, config)
        matches.append(
            MatchEntry(
                reference=query[0].ref,
                candidates=tuple(ranked),
                fallback_used=fallback,
            )
        )
    return MatchReport(
        reference_db=reference_db,
        unknown_dbs=tuple(unknown_dbs),
        config=config,
        matches=tuple(matches),
        skipped=tuple(skipped),
    )


def match_columns(
    reference: DatabaseHandle,
    columns_of_interest: Sequence[str],
    unknowns: Sequence[DatabaseHandle],
    store: EmbeddingStore,
    config: MatchConfig,
    provider: Provider | None = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> MatchReport:
    """End-to-end matching against stored embeddings.

    When `provider` is given, missing embeddings are computed on demand
    and persisted; otherwise any absent key aborts with the full list of
    missing keys. Columns without embeddable values end up in the
    report's skipped list instead of the rankings.
    """
    if not columns_of_interest:
        raise MatcherError("columns_of_interest must not be empty")
    if not unknowns:
        raise MatcherError("at least one unknown database is required")

    skipped: list[tuple[ColumnRef, str]] = []
    missing: list[str] = []

    def resolve(db: DatabaseHandle, column_name: str, role: str) -> EmbeddedColumn | None:
        ref = ColumnRef(
            database=db.name, column_name=column_name, tables=db.tables_for(column_name)
        )
        if not ref.tables:
            raise MatcherError(f"unknown column {column_name} in database {db.name}")
        if store.has(ref):
            return store.get(ref)
        if provider is None:
            missing.append(ref.key())
            return None
        profile = profile_column(db, column_name)
        try:
            col_emb = embed_column(profile, provider, chunk_size)
        except EmptyColumnError:
            skipped.append((ref, f"{role} column has no embeddable values"))
            return None
        meta_emb = embed_metadata(ref, profile.dtype, provider)
        store.put(col_emb, meta_emb)
        return col_emb, meta_emb

    queries = []
    for name in columns_of_interest:
        resolved = resolve(reference, name, "reference")
        if resolved is not None:
            queries.append(resolved)
    candidates = []
    for db in unknowns:
        for column_name in db.column_names():
            resolved = resolve(db, column_name, "candidate")
            if resolved is not None:
                candidates.append(resolved)
    if missing:
        raise MissingEmbeddingError(missing)

    return assemble_report(
        reference_db=reference.name,
        unknown_dbs=[db.name for db in unknowns],
        config=config,
        queries=queries,
        candidates=candidates,
        skipped=skipped,
    )


def report_to_json(report: MatchReport) -> str:
    """Serialize a report with stable key order and 6-decimal scores."""
    doc = {
        "reference_db": report.reference_db,
        "unknown_dbs": list(report.unknown_dbs),
        "config": {
            "k": report.config.k,
            "threshold": report.config.threshold,
            "mode": report.config.mode.value,
        },
        "matches": [
            {
                "reference": _ref_to_dict(entry.reference),
                "candidates": [
                    {
                        "db": cand.target.database,
                        "column": cand.target.column_name,
                        "value_score": cand.value_score,
                        "metadata_score": cand.metadata_score,
                        "contributing_fields": list(cand.contributing_fields),
                        "rank": cand.rank,
                    }
                    for cand in entry.candidates
                ],
                "fallback_used": entry.fallback_used,
            }
            for entry in report.matches
        ],
        "skipped": [
            {"column": _ref_to_dict(ref), "reason": reason}
            for ref, reason in report.skipped
        ],
    }
    return _render_json(doc) + "\n"


def _ref_to_dict(ref: ColumnRef) -> dict:
    return {"db": ref.database, "column": ref.column_name, "tables": list(ref.tables)}


def _render_json(value: object) -> str:
    """Minimal JSON renderer: insertion-ordered keys, floats as %.6f."""
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.6f}"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, Mapping):
        inner = ", ".join(
            f"{json.dumps(k, ensure_ascii=False)}: {_render_json(v)}"
            for k, v in value.items()
        )
        return "{" + inner + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_render_json(v) for v in value) + "]"
    raise TypeError(f"cannot render {type(value)!r} as JSON")


def parse_report(text: str) -> MatchReport:
    """Load a serialized report back into report structures.

    Candidate refs carry no table lists in the wire format; parsed
    candidates have empty `tables`.
    """
    try:
        doc = json.loads(text)
        config = MatchConfig(
            k=int(doc["config"]["k"]),
            threshold=float(doc["config"]["threshold"]),
            mode=MatchMode(doc["config"]["mode"]),
        )
        matches = tuple(
            MatchEntry(
                reference=_ref_from_dict(entry["reference"]),
                candidates=tuple(
                    MatchCandidate(
                        target=ColumnRef(
                            database=cand["db"],
                            column_name=cand["column"],
                            tables=(),
                        ),
                        value_score=float(cand["value_score"]),
                        metadata_score=(
                            None
                            if cand["metadata_score"] is None
                            else float(cand["metadata_score"])
                        ),
                        contributing_fields=tuple(cand["contributing_fields"]),
                        rank=int(cand["rank"]),
                    )
                    for cand in entry["candidates"]
                ),
                fallback_used=bool(entry["fallback_used"]),
            )
            for entry in doc["matches"]
        )
        skipped = tuple(
            (_ref_from_dict(item["column"]), str(item["reason"]))
            for item in doc.get("skipped", [])
        )
        return MatchReport(
            reference_db=doc["reference_db"],
            unknown_dbs=tuple(doc["unknown_dbs"]),
            config=config,
            matches=matches,
            skipped=skipped,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MatcherError(f"invalid match report: {exc}") from exc


def _ref_from_dict(doc: dict) -> ColumnRef:
    return ColumnRef(
        database=doc["db"],
        column_name=doc["column"],
        tables=tuple(doc.get("tables", [])),
    )

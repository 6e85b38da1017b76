"""Scoring match reports against ground truth.

A reference column scores 1 at a given k when its true match appears
among the first k returned candidates; accuracy@k is the fraction of
evaluable columns (those that have a true match) scoring 1. The scaling
experiment enlarges the candidate pool with seeded, nested random
distractor samples so accuracy curves at different pool sizes are
comparable and reproducible.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .matcher import (
    EmbeddedColumn,
    MatchConfig,
    MatchReport,
    assemble_report,
)


class EvaluationError(Exception):
    pass


@dataclass(frozen=True)
class GroundTruthEntry:
    reference_db: str
    reference_column: str
    truth_db: str | None
    truth_column: str | None

    @property
    def has_truth(self) -> bool:
        return self.truth_column is not None


@dataclass(frozen=True)
class GroundTruth:
    entries: tuple[GroundTruthEntry, ...]

    @property
    def evaluable_count(self) -> int:
        return sum(1 for e in self.entries if e.has_truth)


@dataclass(frozen=True)
class EvalResult:
    k: int
    correct: int
    evaluable: int
    accuracy: float
    mode: str
    distractor_count: int | None = None

    @property
    def ratio(self) -> str:
        return f"{self.correct}/{self.evaluable}"


def load_ground_truth(path: Path | str) -> GroundTruth:
    """Parse and validate a ground-truth JSON file."""
    path = Path(path)
    if not path.exists():
        raise EvaluationError(f"ground truth file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise EvaluationError(f"cannot parse ground truth: {exc}") from exc
    return parse_ground_truth(doc)


def parse_ground_truth(doc: object) -> GroundTruth:
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise EvaluationError("ground truth must be an object with an 'entries' list")
    raw_entries = doc["entries"]
    if not raw_entries:
        raise EvaluationError("ground truth has no entries")

    entries = []
    seen: set[tuple[str, str]] = set()
    for raw in raw_entries:
        try:
            ref = raw["reference"]
            ref_key = (str(ref["db"]), str(ref["column"]))
            truth = raw["truth"]
            if truth is not None:
                truth_db, truth_column = str(truth["db"]), str(truth["column"])
            else:
                truth_db = truth_column = None
        except (KeyError, TypeError) as exc:
            raise EvaluationError(f"malformed ground truth entry: {raw!r}") from exc
        if ref_key in seen:
            raise EvaluationError(f"duplicate reference column: {ref_key[1]}")
        seen.add(ref_key)
        entries.append(
            GroundTruthEntry(
                reference_db=ref_key[0],
                reference_column=ref_key[1],
                truth_db=truth_db,
                truth_column=truth_column,
            )
        )
    return GroundTruth(entries=tuple(entries))


def accuracy_at_k(report: MatchReport, truth: GroundTruth, k: int) -> EvalResult:
    """Score one report at cutoff k (which must not exceed the report's k)."""
    if k < 1 or k > report.config.k:
        raise EvaluationError(
            f"k={k} outside the report's configured range 1..{report.config.k}"
        )
    by_reference = {
        (entry.reference.database, entry.reference.column_name): entry
        for entry in report.matches
    }
    skipped_refs = {(ref.database, ref.column_name) for ref, _ in report.skipped}

    correct = 0
    evaluable = 0
    for entry in truth.entries:
        ref_key = (entry.reference_db, entry.reference_column)
        match = by_reference.get(ref_key)
        if match is None and ref_key not in skipped_refs:
            raise EvaluationError(
                f"truth reference {entry.reference_column} missing from report"
            )
        if not entry.has_truth:
            continue
        evaluable += 1
        if match is None:
            continue
        top_k = {
            (cand.target.database, cand.target.column_name)
            for cand in match.candidates[:k]
        }
        if (entry.truth_db, entry.truth_column) in top_k:
            correct += 1

    if evaluable == 0:
        raise EvaluationError("ground truth has no evaluable entries")
    return EvalResult(
        k=k,
        correct=correct,
        evaluable=evaluable,
        accuracy=correct / evaluable,
        mode=report.config.mode.value,
    )


def nested_sample_order(
    distractor_pool: Sequence[EmbeddedColumn], seed: int
) -> list[EmbeddedColumn]:
    """Seeded shuffle of the pool (sorted first, so input order is moot).

    Taking the first N elements gives the N-distractor sample; samples
    for smaller N are therefore subsets of samples for larger N.
    """
    order = sorted(distractor_pool, key=lambda pair: pair[0].ref.sort_key())
    random.Random(seed).shuffle(order)
    return order


def scaling_experiment(
    queries: Sequence[EmbeddedColumn],
    truth: GroundTruth,
    true_pool: Sequence[EmbeddedColumn],
    distractor_pool: Sequence[EmbeddedColumn],
    counts: Sequence[int],
    seed: int,
    config: MatchConfig,
) -> list[EvalResult]:
    """Accuracy as the candidate pool grows by N sampled distractors.

    Distractors are drawn without replacement from a single seeded
    shuffle, so the sample at a smaller count is always a subset of the
    sample at a larger one.
    """
    if not queries:
        raise EvaluationError("no query columns")
    true_keys = {emb.ref.key() for emb, _ in true_pool}
    pool_keys = [emb.ref.key() for emb, _ in distractor_pool]
    if true_keys & set(pool_keys):
        raise EvaluationError("distractor pool overlaps the true-match pool")
    if list(counts) != sorted(counts):
        raise EvaluationError("counts must be non-decreasing")
    if counts and counts[-1] > len(distractor_pool):
        raise EvaluationError(
            f"count {counts[-1]} exceeds distractor pool size {len(distractor_pool)}"
        )

    order = nested_sample_order(distractor_pool, seed)

    reference_db = queries[0][0].ref.database
    results = []
    for count in counts:
        candidates = list(true_pool) + order[:count]
        unknown_dbs = sorted({emb.ref.database for emb, _ in candidates})
        report = assemble_report(
            reference_db=reference_db,
            unknown_dbs=unknown_dbs,
            config=config,
            queries=queries,
            candidates=candidates,
        )
        for k in range(1, config.k + 1):
            results.append(
                replace(accuracy_at_k(report, truth, k), distractor_count=count)
            )
    return results


def render_results(results: Sequence[EvalResult], format: str = "csv") -> str:
    """Serialize results as csv, json, or an aligned text table."""
    if not results:
        raise EvaluationError("no results to render")
    if format == "csv":
        lines = ["mode,k,distractor_count,correct,evaluable,accuracy"]
        for r in results:
            distractors = "" if r.distractor_count is None else str(r.distractor_count)
            lines.append(
                f"{r.mode},{r.k},{distractors},{r.correct},{r.evaluable},{r.accuracy:.6f}"
            )
        return "\n".join(lines) + "\n"
    if format == "json":
        docs = [
            {
                "mode": r.mode,
                "k": r.k,
                "distractor_count": r.distractor_count,
                "correct": r.correct,
                "evaluable": r.evaluable,
                "accuracy": r.accuracy,
                "ratio": r.ratio,
            }
            for r in results
        ]
        return json.dumps(docs, indent=2) + "\n"
    if format == "table":
        ordered = sorted(
            results,
            key=lambda r: (
                r.mode,
                -1 if r.distractor_count is None else r.distractor_count,
                r.k,
            ),
        )
        rows = [("mode", "k", "distractors", "score", "accuracy")]
        for r in ordered:
            rows.append(
                (
                    r.mode,
                    str(r.k),
                    "-" if r.distractor_count is None else str(r.distractor_count),
                    r.ratio,
                    f"{r.accuracy:.3f}",
                )
            )
        widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
        return (
            "\n".join(
                "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
                for row in rows
            )
            + "\n"
        )
    raise EvaluationError(f"unknown format: {format}")


def parse_results(text: str) -> list[EvalResult]:
    """Inverse of `render_results(format='json')`."""
    try:
        docs = json.loads(text)
        return [
            EvalResult(
                k=int(d["k"]),
                correct=int(d["correct"]),
                evaluable=int(d["evaluable"]),
                accuracy=float(d["accuracy"]),
                mode=str(d["mode"]),
                distractor_count=(
                    None if d["distractor_count"] is None else int(d["distractor_count"])
                ),
            )
            for d in docs
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise EvaluationError(f"invalid results document: {exc}") from exc

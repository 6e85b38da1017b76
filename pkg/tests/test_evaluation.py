"""Tests for ground truth loading, accuracy@k, and the scaling experiment."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from colmatch.embedding import ColumnEmbedding, HashEmbedder, embed_metadata
from colmatch.evaluation import (
    EvaluationError,
    GroundTruth,
    GroundTruthEntry,
    accuracy_at_k,
    load_ground_truth,
    parse_results,
    render_results,
    scaling_experiment,
)
from colmatch.ingest import ColumnRef, DataType
from colmatch.matcher import (
    MatchCandidate,
    MatchConfig,
    MatchEntry,
    MatchMode,
    MatchReport,
)

DIM = 24


def _truth_doc(entries: list[tuple[str, str | None]]) -> dict:
    return {
        "entries": [
            {
                "reference": {"db": "mimic", "column": ref},
                "truth": None if truth is None else {"db": "eicu", "column": truth},
            }
            for ref, truth in entries
        ]
    }


def _report(
    ranking: dict[str, list[str]], k: int = 3, mode: MatchMode = MatchMode.VALUES_ONLY
) -> MatchReport:
    matches = tuple(
        MatchEntry(
            reference=ColumnRef("mimic", ref, ("t",)),
            candidates=tuple(
                MatchCandidate(
                    target=ColumnRef("eicu", name, ()),
                    value_score=1.0 - 0.1 * i,
                    metadata_score=None,
                    contributing_fields=(),
                    rank=i + 1,
                )
                for i, name in enumerate(candidates)
            ),
            fallback_used=False,
        )
        for ref, candidates in ranking.items()
    )
    return MatchReport(
        reference_db="mimic",
        unknown_dbs=("eicu",),
        config=MatchConfig(k=k, mode=mode),
        matches=matches,
    )


def test_load_ground_truth_counts(tmp_path: Path) -> None:
    doc = _truth_doc(
        [(f"col{i}", f"match{i}") for i in range(13)]
        + [("insurance", None), ("dob", None), ("seq_num", None)]
    )
    path = tmp_path / "truth.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    truth = load_ground_truth(path)
    assert len(truth.entries) == 16
    assert truth.evaluable_count == 13


def test_load_ground_truth_duplicate_reference(tmp_path: Path) -> None:
    doc = _truth_doc([("gender", "gender"), ("gender", "sex")])
    path = tmp_path / "truth.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(EvaluationError, match="duplicate"):
        load_ground_truth(path)


def test_load_ground_truth_empty_entries(tmp_path: Path) -> None:
    path = tmp_path / "truth.json"
    path.write_text(json.dumps({"entries": []}), encoding="utf-8")
    with pytest.raises(EvaluationError, match="no entries"):
        load_ground_truth(path)


def test_load_ground_truth_parse_failure(tmp_path: Path) -> None:
    path = tmp_path / "truth.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(EvaluationError, match="parse"):
        load_ground_truth(path)


def test_load_ground_truth_missing_file(tmp_path: Path) -> None:
    with pytest.raises(EvaluationError, match="not found"):
        load_ground_truth(tmp_path / "absent.json")


def test_accuracy_seven_of_thirteen() -> None:
    ranking = {f"col{i}": ["hit" if i < 7 else "miss"] for i in range(13)}
    truth = GroundTruth(
        entries=tuple(
            GroundTruthEntry("mimic", f"col{i}", "eicu", "hit") for i in range(13)
        )
    )
    result = accuracy_at_k(_report(ranking), truth, k=1)
    assert result.correct == 7
    assert result.evaluable == 13
    assert result.accuracy == pytest.approx(0.538, abs=0.001)
    assert result.ratio == "7/13"


def test_accuracy_twelve_of_thirteen() -> None:
    ranking = {f"col{i}": ["hit" if i < 12 else "miss"] for i in range(13)}
    truth = GroundTruth(
        entries=tuple(
            GroundTruthEntry("mimic", f"col{i}", "eicu", "hit") for i in range(13)
        )
    )
    result = accuracy_at_k(_report(ranking), truth, k=1)
    assert result.accuracy == pytest.approx(0.923, abs=0.001)


def test_accuracy_boundary_at_k() -> None:
    ranking = {"col": ["a", "b", "hit"]}
    truth = GroundTruth(entries=(GroundTruthEntry("mimic", "col", "eicu", "hit"),))
    report = _report(ranking)
    assert accuracy_at_k(report, truth, k=3).correct == 1
    assert accuracy_at_k(report, truth, k=2).correct == 0


def test_accuracy_ignores_truthless_entries() -> None:
    ranking = {"col": ["hit"], "insurance": ["whatever"]}
    truth = GroundTruth(
        entries=(
            GroundTruthEntry("mimic", "col", "eicu", "hit"),
            GroundTruthEntry("mimic", "insurance", None, None),
        )
    )
    result = accuracy_at_k(_report(ranking), truth, k=1)
    assert result.evaluable == 1
    assert result.accuracy == 1.0


def test_accuracy_k_beyond_report_config() -> None:
    ranking = {"col": ["hit"]}
    truth = GroundTruth(entries=(GroundTruthEntry("mimic", "col", "eicu", "hit"),))
    with pytest.raises(EvaluationError, match="outside"):
        accuracy_at_k(_report(ranking, k=3), truth, k=4)


def test_accuracy_missing_reference_in_report() -> None:
    truth = GroundTruth(entries=(GroundTruthEntry("mimic", "ghost", "eicu", "hit"),))
    with pytest.raises(EvaluationError, match="missing from report"):
        accuracy_at_k(_report({"col": ["hit"]}), truth, k=1)


def test_accuracy_non_decreasing_in_k() -> None:
    ranking = {
        "a": ["hit", "x", "y"],
        "b": ["x", "hit", "y"],
        "c": ["x", "y", "hit"],
    }
    truth = GroundTruth(
        entries=tuple(GroundTruthEntry("mimic", c, "eicu", "hit") for c in "abc")
    )
    report = _report(ranking)
    accuracies = [accuracy_at_k(report, truth, k).accuracy for k in (1, 2, 3)]
    assert accuracies == sorted(accuracies)


def _embedded(column: str, vec: np.ndarray, db: str = "eicu"):
    ref = ColumnRef(db, column, ("t",))
    emb = ColumnEmbedding(
        ref=ref, mean=vec.astype(np.float32), value_count=1, provider_id="hash-v1"
    )
    return (emb, embed_metadata(ref, DataType.TEXT, HashEmbedder(dim=DIM)))


def _experiment_inputs():
    rng = np.random.default_rng(5)
    true_vectors = rng.standard_normal((4, DIM))
    queries = [_embedded(f"q{i}", true_vectors[i], db="mimic") for i in range(4)]
    true_pool = [_embedded(f"t{i}", true_vectors[i] + rng.normal(0, 0.01, DIM)) for i in range(4)]
    distractors = [_embedded(f"d{i}", rng.standard_normal(DIM)) for i in range(12)]
    truth = GroundTruth(
        entries=tuple(
            GroundTruthEntry("mimic", f"q{i}", "eicu", f"t{i}") for i in range(4)
        )
    )
    return queries, truth, true_pool, distractors


def test_scaling_zero_count_matches_baseline() -> None:
    queries, truth, true_pool, distractors = _experiment_inputs()
    config = MatchConfig(k=3)
    results = scaling_experiment(queries, truth, true_pool, distractors, [0], 42, config)
    assert [r.k for r in results] == [1, 2, 3]
    assert all(r.distractor_count == 0 for r in results)
    # With only the (near-identical) true columns as candidates, everything hits.
    assert results[0].accuracy == 1.0


def test_scaling_deterministic_for_seed() -> None:
    queries, truth, true_pool, distractors = _experiment_inputs()
    config = MatchConfig(k=2)
    first = scaling_experiment(queries, truth, true_pool, distractors, [3, 7], 9, config)
    second = scaling_experiment(queries, truth, true_pool, distractors, [3, 7], 9, config)
    assert first == second


def test_scaling_results_shape() -> None:
    queries, truth, true_pool, distractors = _experiment_inputs()
    config = MatchConfig(k=3)
    results = scaling_experiment(queries, truth, true_pool, distractors, [0, 5, 12], 1, config)
    assert len(results) == 9
    assert [(r.distractor_count, r.k) for r in results] == [
        (0, 1), (0, 2), (0, 3), (5, 1), (5, 2), (5, 3), (12, 1), (12, 2), (12, 3),
    ]


def test_scaling_rejects_overlapping_pools() -> None:
    queries, truth, true_pool, _ = _experiment_inputs()
    with pytest.raises(EvaluationError, match="overlap"):
        scaling_experiment(queries, truth, true_pool, true_pool, [1], 0, MatchConfig())


def test_scaling_rejects_count_beyond_pool() -> None:
    queries, truth, true_pool, distractors = _experiment_inputs()
    with pytest.raises(EvaluationError, match="exceeds"):
        scaling_experiment(queries, truth, true_pool, distractors, [99], 0, MatchConfig())


def test_scaling_rejects_decreasing_counts() -> None:
    queries, truth, true_pool, distractors = _experiment_inputs()
    with pytest.raises(EvaluationError, match="non-decreasing"):
        scaling_experiment(queries, truth, true_pool, distractors, [5, 2], 0, MatchConfig())


def test_nested_samples_are_prefix_subsets() -> None:
    from colmatch.evaluation import nested_sample_order

    _, _, _, distractors = _experiment_inputs()
    order = nested_sample_order(distractors, seed=17)
    keys = [emb.ref.key() for emb, _ in order]
    assert sorted(keys) == sorted(emb.ref.key() for emb, _ in distractors)
    for small, large in ((3, 7), (0, 12), (7, 12)):
        assert set(keys[:small]) <= set(keys[:large])
    # Input ordering is irrelevant; only the seed matters.
    shuffled_input = list(reversed(distractors))
    again = [emb.ref.key() for emb, _ in nested_sample_order(shuffled_input, seed=17)]
    assert again == keys


def test_render_csv_single_row() -> None:
    from colmatch.evaluation import EvalResult

    text = render_results(
        [EvalResult(k=3, correct=7, evaluable=13, accuracy=7 / 13, mode="values_only")],
        "csv",
    )
    lines = text.strip().splitlines()
    assert lines[0] == "mode,k,distractor_count,correct,evaluable,accuracy"
    assert lines[1] == "values_only,3,,7,13,0.538462"


def test_render_json_round_trips() -> None:
    from colmatch.evaluation import EvalResult

    results = [
        EvalResult(k=1, correct=3, evaluable=4, accuracy=0.75, mode="values_only", distractor_count=5),
        EvalResult(k=2, correct=4, evaluable=4, accuracy=1.0, mode="values_only", distractor_count=5),
    ]
    assert parse_results(render_results(results, "json")) == results


def test_render_table_sorted_and_aligned() -> None:
    from colmatch.evaluation import EvalResult

    results = [
        EvalResult(k=2, correct=1, evaluable=2, accuracy=0.5, mode="b", distractor_count=10),
        EvalResult(k=1, correct=1, evaluable=2, accuracy=0.5, mode="b", distractor_count=0),
        EvalResult(k=1, correct=2, evaluable=2, accuracy=1.0, mode="a", distractor_count=0),
    ]
    lines = render_results(results, "table").splitlines()
    assert lines[0].split() == ["mode", "k", "distractors", "score", "accuracy"]
    assert lines[1].startswith("a")
    # Within a mode, ordered by (distractor_count, k).
    assert lines[2].split()[:3] == ["b", "1", "0"]
    assert lines[3].split()[:3] == ["b", "2", "10"]


def test_render_rejects_empty() -> None:
    with pytest.raises(EvaluationError):
        render_results([], "csv")

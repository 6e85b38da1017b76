"""Tests for match-report JSON serialization."""

from __future__ import annotations

import json

import pytest

from colmatch.ingest import ColumnRef
from colmatch.matcher import (
    MatchCandidate,
    MatchConfig,
    MatchEntry,
    MatcherError,
    MatchMode,
    MatchReport,
    parse_report,
    report_to_json,
)


def _sample_report() -> MatchReport:
    return MatchReport(
        reference_db="mini-mimic",
        unknown_dbs=("mini-eicu",),
        config=MatchConfig(k=3, threshold=0.4, mode=MatchMode.METADATA_RERANK),
        matches=(
            MatchEntry(
                reference=ColumnRef("mini-mimic", "gender", ("patients",)),
                candidates=(
                    MatchCandidate(
                        target=ColumnRef("mini-eicu", "gender", ()),
                        value_score=0.123456789,
                        metadata_score=0.987654321,
                        contributing_fields=("CN", "TN"),
                        rank=1,
                    ),
                ),
                fallback_used=True,
            ),
        ),
        skipped=(
            (ColumnRef("mini-mimic", "empty_col", ("chartevents",)), "reference column has no embeddable values"),
        ),
    )


def test_report_json_is_valid_and_ordered() -> None:
    text = report_to_json(_sample_report())
    doc = json.loads(text)
    assert list(doc.keys()) == ["reference_db", "unknown_dbs", "config", "matches", "skipped"]
    assert list(doc["config"].keys()) == ["k", "threshold", "mode"]
    candidate = doc["matches"][0]["candidates"][0]
    assert list(candidate.keys()) == [
        "db", "column", "value_score", "metadata_score", "contributing_fields", "rank",
    ]
    assert doc["matches"][0]["fallback_used"] is True
    assert doc["skipped"][0]["column"]["column"] == "empty_col"


def test_report_scores_have_six_decimals() -> None:
    text = report_to_json(_sample_report())
    assert '"value_score": 0.123457' in text
    assert '"metadata_score": 0.987654' in text
    assert '"threshold": 0.400000' in text


def test_report_serialization_is_byte_stable() -> None:
    report = _sample_report()
    assert report_to_json(report) == report_to_json(report)


def test_report_round_trip() -> None:
    report = _sample_report()
    parsed = parse_report(report_to_json(report))
    assert parsed.reference_db == report.reference_db
    assert parsed.unknown_dbs == report.unknown_dbs
    assert parsed.config.k == 3
    assert parsed.config.mode is MatchMode.METADATA_RERANK
    entry = parsed.matches[0]
    assert entry.reference == report.matches[0].reference
    assert entry.fallback_used is True
    cand = entry.candidates[0]
    assert cand.target.column_name == "gender"
    assert cand.value_score == pytest.approx(0.123457)
    assert cand.metadata_score == pytest.approx(0.987654)
    assert cand.contributing_fields == ("CN", "TN")
    assert parsed.skipped[0][1] == "reference column has no embeddable values"


def test_report_null_metadata_score() -> None:
    report = MatchReport(
        reference_db="a",
        unknown_dbs=("b",),
        config=MatchConfig(),
        matches=(
            MatchEntry(
                reference=ColumnRef("a", "x", ("t",)),
                candidates=(
                    MatchCandidate(
                        target=ColumnRef("b", "y", ()),
                        value_score=0.5,
                        metadata_score=None,
                        contributing_fields=(),
                        rank=1,
                    ),
                ),
                fallback_used=False,
            ),
        ),
    )
    text = report_to_json(report)
    assert '"metadata_score": null' in text
    assert parse_report(text).matches[0].candidates[0].metadata_score is None


def test_parse_report_rejects_garbage() -> None:
    with pytest.raises(MatcherError, match="invalid match report"):
        parse_report('{"nope": 1}')

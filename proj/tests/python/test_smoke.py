import json
import math
import os
from pathlib import Path

import pytest

import trialmatch

FIXTURE = Path(os.environ.get("TRIALMATCH_FIXTURE_DIR", Path(__file__).resolve().parents[2] / "data" / "fixture"))


def test_fusion_hand_value():
    lists = [
        ("lexical", 1, [("T", 9.0)]),
        ("dense", 1, [("other", 9.0), ("T", 8.0)]),
        ("lexical", 2, [("a", 3.0), ("b", 2.0), ("T", 1.0)]),
    ]
    scores = dict(trialmatch.fuse(lists))
    assert scores["T"] == pytest.approx(1 / 21 + 1 / 22 + 1 / (2 * 23), abs=1e-12)


def test_fusion_rejects_bad_input():
    with pytest.raises(trialmatch.ConfigError):
        trialmatch.fuse([("lexical", 1, [("T", 1.0)])], rrf_constant=0.0)
    with pytest.raises(ValueError):
        trialmatch.fuse([("sparse", 1, [("T", 1.0)])])


def test_bm25_single_term():
    docs = [("d1", "glioma glioma resection"), ("d2", "asthma")]
    ranked = trialmatch.bm25(docs, "asthma")
    assert [d for d, _ in ranked] == ["d2"]
    idf = math.log(1 + (2 - 1 + 0.5) / 1.5)
    norm = 1 - 0.75 + 0.75 * 1 / 2.0
    assert ranked[0][1] == pytest.approx(idf * 2.5 / (1 + 1.5 * norm), abs=1e-12)


def test_parse_matching_response_repairs_and_fills():
    text = '```json\n{"0": {"explanation": "fine", "sentences": [1], "label": "included"}}\n```'
    preds = trialmatch.parse_matching_response(text, 2, "inclusion", 3)
    assert [p["criterion_index"] for p in preds] == [0, 1]
    assert preds[0]["label"] == "included"
    assert preds[0]["parse_status"] == "repaired"
    assert preds[0]["relevant_sentences"] == [1]
    assert preds[1]["label"] == "not_enough_information"
    assert preds[1]["parse_status"] == "failed"


def test_combine_and_metrics():
    assert trialmatch.combine(1.0, 0.0, 0.0, 80, 60) == (2.4, -2.4)
    labels = {"a": "eligible", "b": "irrelevant", "c": "excluded"}
    assert trialmatch.ndcg_at_k(["a", "b", "c"], labels, 3) == pytest.approx(0.95023, abs=1e-4)
    assert trialmatch.precision_at_k(["a", "b", "c"], labels, 2) == pytest.approx(0.5)
    assert trialmatch.auroc([(0.9, True), (0.3, True), (0.8, False), (0.2, False)]) == 0.75
    assert trialmatch.auroc([(0.5, True)]) is None


def test_pipeline_on_fixture(tmp_path):
    reports = trialmatch.run_pipeline(FIXTURE / "pipeline.toml", out_dir=tmp_path / "out", backend="mock", seed=7)
    assert [stage for stage, _, _ in reports] == ["ingest", "index", "retrieve", "match", "rank", "evaluate"]
    assert all(not failures for _, _, failures in reports)
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert set(report) >= {"retrieval", "ranking", "excluding"}


def test_synthetic_cohort_ranks_perfectly(tmp_path):
    trialmatch.synth(tmp_path / "cohort", patients=3, trials=15, seed=2)
    trialmatch.run_pipeline(tmp_path / "cohort" / "pipeline.toml", out_dir=tmp_path / "out")
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["ranking"]["combination"]["cohorts"][0]["mean"]["ndcg@10"] == 1.0


def test_missing_config_is_missing_input(tmp_path):
    with pytest.raises(trialmatch.MissingInput):
        trialmatch.run_pipeline(tmp_path / "absent.toml")
    with pytest.raises(FileNotFoundError):
        trialmatch.run_pipeline(tmp_path / "absent.toml")

import json
import math
from pathlib import Path

import pytest

import guidecqr as g

FIXTURES = Path(__file__).resolve().parents[2] / "fixtures"


def test_tokenize_and_sentences():
    assert g.tokenize("Hello, World! 42") == ["hello", "world", "42"]
    assert g.split_sentences("One. Two? Three") == ["One.", "Two?", "Three"]


def test_bm25_order_and_errors(tmp_path):
    idx = g.CorpusIndex.build([("a", "cats purr"), ("b", "dogs bark"), ("c", "cats and dogs")])
    hits = g.CorpusIndex.bm25(idx, "cats", 10)
    assert [d for d, _ in hits] == ["a", "c"]
    assert hits[0][1] > hits[1][1] > 0
    with pytest.raises(g.PreconditionError):
        idx.bm25("?!", 3)
    idx.save(tmp_path / "i.gcqr")
    again = g.CorpusIndex.load(tmp_path / "i.gcqr")
    assert again.bm25("cats", 10) == hits
    assert again.doc_count == 3


def test_embeddings_and_scores():
    u, v = g.embed(["red apple", "green apple"], dimension=64, seed=7)
    assert math.isclose(sum(x * x for x in u), 1.0)
    assert g.embed(["red apple"], dimension=64, seed=7)[0] == u
    c = g.cosine(u, v)
    assert math.isclose(g.query_score(u, v), 10 * (1 - c))
    hs_max = g.history_score([u, v], v)
    hs_min = g.history_score([u, v], v, "min_distance")
    assert hs_max >= hs_min
    assert g.history_score([], v) == 0.0
    assert g.filter_score(2.0, 4.0) == 3.0


def test_metrics():
    run = [("q", "d1", 1, 3.0), ("q", "d2", 2, 2.0), ("q", "d3", 3, 1.0)]
    qrels = {"q": {"d2": 1}}
    assert g.mrr(run, qrels) == 0.5
    ideal = 1.0
    dcg = 1 / math.log2(3)
    assert math.isclose(g.ndcg(run, qrels, 3), dcg / ideal)


def test_pipeline_end_to_end(tmp_path):
    cfg = g.PipelineConfig.load(FIXTURES / "fixture.toml")
    cfg.output_dir = tmp_path
    cfg.workers = 2
    assert g.cmd_index(cfg)["doc_count"] == 50
    summary = g.cmd_reformulate(cfg)
    assert summary["exit_code"] == 0 and summary["turns"] == 6
    golden = (FIXTURES / "golden" / "guidecqr.run").read_bytes()
    assert (tmp_path / "guidecqr.run").read_bytes() == golden
    report = g.cmd_evaluate(cfg)
    frozen = json.loads((FIXTURES / "golden" / "metrics.json").read_text())
    assert math.isclose(report["MRR"], frozen["guidecqr"]["MRR"], rel_tol=1e-12)
    assert math.isclose(report["baseline"]["MRR"], frozen["baseline"]["MRR"], rel_tol=1e-12)


def test_config_and_sweep(tmp_path):
    cfg = g.PipelineConfig.load(FIXTURES / "fixture.toml")
    assert g.PipelineConfig.parse(cfg.to_toml()).filter_threshold == cfg.filter_threshold
    cfg.output_dir = tmp_path
    rows = g.cmd_sweep(cfg, "filter_threshold", [0.0, 5.0])
    assert [r["ok"] for r in rows] == [True, True]
    assert rows[0]["kept_items"] >= rows[1]["kept_items"]
    with pytest.raises(g.PreconditionError):
        g.cmd_sweep(cfg, "nonsense", [1.0])
    cfg.guided_n = 0
    with pytest.raises(g.Error):
        cfg.validate()

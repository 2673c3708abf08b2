"""Independent MRR / NDCG@k oracle for the frozen fixture runs.

Writes fixtures/golden/metrics.json, which the unit tests compare against.
Usage: python tools/golden_metrics.py [--check]
"""
import argparse
import json
import math
from collections import defaultdict
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
REL_THRESHOLD = 1
NDCG_K = 3


def read_qrels(path):
    qrels = defaultdict(dict)
    for line in path.read_text().splitlines():
        if line.strip():
            qid, _, doc, rel = line.split()
            qrels[qid][doc] = int(rel)
    return qrels


def read_run(path):
    run = defaultdict(list)
    for line in path.read_text().splitlines():
        if line.strip():
            qid, _, doc, rank, _score, _tag = line.split()
            run[qid].append((int(rank), doc))
    return {q: [d for _, d in sorted(v)] for q, v in run.items()}


def metrics(run, qrels):
    judged = [q for q in run if q in qrels]
    rr = []
    for q in judged:
        if not any(r >= REL_THRESHOLD for r in qrels[q].values()):
            continue
        hit = next((i for i, d in enumerate(run[q], 1) if qrels[q].get(d, 0) >= REL_THRESHOLD), None)
        rr.append(1.0 / hit if hit else 0.0)
    nd = []
    for q in judged:
        gains = [qrels[q].get(d, 0) for d in run[q][:NDCG_K]]
        dcg = sum(g / math.log2(i + 2) for i, g in enumerate(gains))
        ideal = sorted(qrels[q].values(), reverse=True)[:NDCG_K]
        idcg = sum(g / math.log2(i + 2) for i, g in enumerate(ideal))
        nd.append(dcg / idcg if idcg > 0 else 0.0)
    return {
        "MRR": sum(rr) / len(rr) if rr else 0.0,
        f"NDCG@{NDCG_K}": sum(nd) / len(nd) if nd else 0.0,
        "evaluated_queries": len(judged),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--check", action="store_true", help="compare instead of writing")
    args = ap.parse_args()
    qrels = read_qrels(FIXTURES / "qrels.txt")
    out = {
        name: metrics(read_run(FIXTURES / "golden" / f"{name}.run"), qrels)
        for name in ("guidecqr", "baseline")
    }
    target = FIXTURES / "golden" / "metrics.json"
    if args.check:
        frozen = json.loads(target.read_text())
        for name, vals in out.items():
            for key, v in vals.items():
                assert abs(frozen[name][key] - v) < 1e-12, (name, key, v, frozen[name][key])
        print("golden metrics match")
        return
    target.write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()

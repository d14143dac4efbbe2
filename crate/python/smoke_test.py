"""Smoke test for the mvprf extension module.

Build and install the module first, e.g.

    pip install maturin
    maturin develop --release -m crates/python/Cargo.toml

then run ``python python/smoke_test.py``.
"""

import math
import tempfile
from pathlib import Path

import mvprf


def main():
    # scoring primitives
    q = [[1.0, 0.0], [0.0, 1.0]]
    d = [[0.5, 0.5], [1.0, 0.0]]
    assert math.isclose(mvprf.maxsim(q, d), 1.5)
    assert math.isclose(mvprf.prf_score(q, [([0.0, 1.0], 2.0)], 0.5, d), 2.0)
    assert mvprf.prf_score(q, [([0.0, 1.0], 0.0)], 1.0, d) == mvprf.maxsim(q, d)

    centroids, assignments, inertia = mvprf.kmeans([[0.0], [0.1], [5.0], [5.1]], 2, seed=1)
    assert len(centroids) == 2 and len(assignments) == 4
    assert all(b <= a + 1e-9 for a, b in zip(inertia, inertia[1:]))

    assert mvprf.holm_adjust([0.01, 0.04]) == [0.02, 0.04]

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        docs, queries = mvprf.synth(str(tmp / "data"), topics=4, docs_per_topic=10, dim=16, noise=0.5)
        assert docs == 40 and queries == 8

        index = mvprf.Index.build(str(tmp / "data" / "corpus.cmve"))
        assert index.doc_count == 40 and index.dim == 16
        index.save(str(tmp / "idx"))
        index = mvprf.Index.load(str(tmp / "idx"))
        assert index.idf(0) == 0.0  # stopword present in every document

        cfg = mvprf.PrfConfig(kprime=20, k=8, fe=4)
        results = {}
        for mode in ("e2e", "prf-rerank", "prf-rank"):
            run, mrt = index.search_file(str(tmp / "data" / "queries.cmve"), mode=mode, config=cfg)
            path = tmp / f"{mode}.run"
            path.write_text(run)
            results[mode] = mvprf.evaluate(str(path), str(tmp / "data" / "qrels.txt"))
            assert mrt >= 0.0
        for mode, metrics in results.items():
            print(mode, {k: round(v, 4) for k, v in metrics.items()})
            assert set(metrics) == {"MAP@1000", "NDCG@10", "MRR@10", "Recall@1000"}

        top = index.search(index.doc_embeddings(0), mode="e2e", config=cfg)
        assert top[0][0] == index.docno(0)

        try:
            mvprf.PrfConfig(beta=-1.0)
        except mvprf.MvprfError as e:
            assert "[config]" in str(e) or "[value]" in str(e)
        else:
            raise AssertionError("negative beta accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()

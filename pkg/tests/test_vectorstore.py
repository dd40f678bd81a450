import json
import statistics
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sodefect.vectorstore import (
    ScoredPost,
    StoreError,
    VectorStore,
    build_store,
    threshold_for,
)


def scalar_oracle(entries, alpha, k):
    """Exhaustive scan: sort every entry by (|alpha' - alpha|, key)."""
    return [e.key for e in sorted(entries, key=lambda e: (abs(e.alpha - alpha), e.key))[:k]]


def alpha_store(alphas):
    """A 2-d store whose entries have (up to rounding) the requested cosine to the reference (1, 0)."""
    store = VectorStore(2)
    store.add((0, 0), "Java", [1.0, 0.0])
    store.build()
    for i, a in enumerate(alphas, start=1):
        store.insert((i, 0), "Java", [a, np.sqrt(max(0.0, 1 - a * a))])
    return store


def test_insert_reference_and_orthogonal():
    store = alpha_store([])
    assert store.insert((5, 0), "Java", [3.0, 0.0]).alpha == 1.0
    assert store.insert((6, 0), "Java", [0.0, 2.0]).alpha == 0.0


def test_duplicate_and_zero_rejected():
    store = alpha_store([0.5])
    with pytest.raises(StoreError, match="duplicate"):
        store.insert((1, 0), "Java", [1.0, 1.0])
    with pytest.raises(StoreError, match="zero"):
        store.insert((9, 0), "Java", [0.0, 0.0])
    with pytest.raises(StoreError):
        store.insert((9, 1), "Java", [1.0, 0.0, 0.0])


def test_insert_requires_reference():
    with pytest.raises(StoreError, match="no reference"):
        VectorStore(2).insert((1, 0), "Java", [1, 0])


def test_reference_is_lowest_key():
    store = VectorStore(2)
    store.add((9, 0), "C", [0, 1])
    store.add((3, 2), "C", [1, 1])
    store.add((3, 1), "C", [1, 0])
    store.build()
    assert store.references["C"].source_key == (3, 1)
    assert store.choose_reference("C").source_key == (3, 1)
    assert {e.key: round(e.alpha, 6) for e in store.entries("C")} == {(3, 1): 1.0, (3, 2): 0.707107, (9, 0): 0.0}


def test_topk_by_pivot_examples():
    store = alpha_store([0.90, 0.95, 0.97, 0.99])
    # the (0, 0) reference itself sits at alpha 1.0
    got = [round(e.alpha, 6) for e in store.topk_by_pivot(0.96, 2, "Java")]
    assert sorted(got) == [0.95, 0.97]
    assert len(store.topk_by_pivot(0.5, 10, "Java")) == 5


def test_topk_by_pivot_tie_by_key():
    store = VectorStore(2)
    store.add((1, 0), "Java", [1, 0])
    store.build()
    store.insert((7, 0), "Java", [0.6, 0.8])
    store.insert((4, 0), "Java", [0.6, -0.8])
    assert [e.key for e in store.topk_by_pivot(0.6, 2, "Java")] == [(4, 0), (7, 0)]
    assert [e.key for e in store.topk_by_pivot(0.6, 1, "Java")] == [(4, 0)]


def test_topk_exact_examples():
    rng = np.random.default_rng(0)
    vecs = rng.normal(size=(30, 8))
    store = build_store(8, [((i, 0), "Python", v) for i, v in enumerate(vecs)])
    hits = store.topk_exact(vecs[12], 3, "Python")
    assert hits[0][0].key == (12, 0)
    assert hits[0][1] == pytest.approx(1.0, abs=1e-6)
    full = store.topk_exact(vecs[0], 30, "Python")
    assert sorted(e.key for e, _ in full) == [(i, 0) for i in range(30)]
    sims = [s for _, s in full]
    assert sims == sorted(sims, reverse=True)


def test_pivot_vs_exact_overlap_reported(capsys):
    rng = np.random.default_rng(3)
    vecs = rng.normal(size=(100, 16))
    store = build_store(16, [((i, 0), "Java", v) for i, v in enumerate(vecs)])
    overlaps = []
    for q in rng.normal(size=(20, 16)):
        piv = {e.key for e in store.topk_by_pivot(store.reference_alpha("Java", q), 5, "Java")}
        ex = {e.key for e, _ in store.topk_exact(q, 5, "Java")}
        overlaps.append(len(piv & ex))
    print(f"pivot/exact overlap at K=5 over 20 queries: mean {np.mean(overlaps):.2f}")
    assert all(0 <= o <= 5 for o in overlaps)


def test_empty_language_errors():
    store = alpha_store([0.3])
    with pytest.raises(StoreError):
        store.topk_by_pivot(0.1, 3, "C")
    with pytest.raises(ValueError):
        store.topk_by_pivot(0.1, 0, "Java")


def test_threshold_defaults_and_override():
    assert threshold_for("C") == 0.963
    assert threshold_for("Java") == 0.97
    assert threshold_for("Python") == 0.9617
    assert threshold_for("C#") == 0.954
    assert threshold_for("JavaScript") == 0.967
    assert threshold_for("Java", {"Java": 0.5}) == 0.5
    with pytest.raises(ValueError):
        threshold_for("Cobol")


@given(
    st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=60),
    st.floats(-1, 1, allow_nan=False),
    st.integers(1, 12),
)
@settings(max_examples=200, deadline=None)
def test_pivot_matches_scalar_oracle(alphas, query, k):
    # quantize to force ties
    alphas = [round(a, 1) for a in alphas]
    store = alpha_store(alphas)
    got = [e.key for e in store.topk_by_pivot(query, k, "Java")]
    assert got == scalar_oracle(store.entries("Java"), query, k)


def test_alpha_consistency_and_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    items = [((i // 3, i % 3), lang, rng.normal(size=12)) for i, lang in zip(range(90), ["C", "Java", "Python"] * 30)]
    store = build_store(12, items)
    store.set_scores({k: ScoredPost(-1 if k[0] % 2 else 1, f"t{k[0]}") for k, _, _ in items})
    for lang in store.languages():
        ref = store.references[lang].vector.astype(np.float64)
        for e in store.entries(lang):
            v = e.vector.astype(np.float64)
            assert abs(v @ ref / np.linalg.norm(v) / np.linalg.norm(ref) - e.alpha) <= 1e-6
    store.save(tmp_path / "s")
    loaded = VectorStore.load(tmp_path / "s")
    assert loaded.frozen and len(loaded) == 90
    assert loaded.references.keys() == store.references.keys()
    for lang in store.languages():
        a = {e.key: (e.alpha, e.vector.tobytes()) for e in store.entries(lang)}
        b = {e.key: (e.alpha, e.vector.tobytes()) for e in loaded.entries(lang)}
        assert a == b
    assert loaded.score_of((3, 1)) == ScoredPost(-1, "t3")
    loaded.save(tmp_path / "s2")
    for name in ("vectors.bin", "index.jsonl", "reference.json", "scores.jsonl"):
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "s2" / name).read_bytes()
    rec = json.loads((tmp_path / "s" / "index.jsonl").read_text().splitlines()[0])
    assert list(rec) == ["postId", "fragId", "language", "alpha", "row"]
    with pytest.raises(StoreError, match="frozen"):
        loaded.insert((99, 0), "C", rng.normal(size=12))


def test_load_incomplete_store(tmp_path):
    with pytest.raises(StoreError, match="missing"):
        VectorStore.load(tmp_path)


def test_score_of_missing():
    with pytest.raises(StoreError, match="score"):
        alpha_store([0.1]).score_of((1, 0))


@pytest.mark.slow
def test_pivot_speedup_over_exact():
    rng = np.random.default_rng(0)
    n, dim = 100_000, 100
    store = VectorStore(dim)
    store.add((0, 0), "Java", rng.normal(size=dim))
    store.build()
    store.insert_many([(i, 0) for i in range(1, n)], "Java", rng.normal(size=(n - 1, dim)).astype(np.float32))
    store.freeze()
    q = rng.normal(size=dim)
    alpha = store.reference_alpha("Java", q)
    store.topk_by_pivot(alpha, 5, "Java")
    store.topk_exact(q, 5, "Java")

    def median_time(fn):
        ts = []
        for _ in range(20):
            t = time.perf_counter()
            fn()
            ts.append(time.perf_counter() - t)
        return statistics.median(ts)

    pivot = median_time(lambda: store.topk_by_pivot(alpha, 5, "Java"))
    exact = median_time(lambda: store.topk_exact(q, 5, "Java"))
    print(f"pivot {pivot * 1e6:.1f} us, exact {exact * 1e3:.2f} ms, speedup {exact / pivot:.0f}x")
    assert exact / pivot >= 10


def test_pivot_ties_from_rounding():
    # collinear vectors share a cosine mathematically but not bit-for-bit
    store = VectorStore(2)
    store.add((0, 0), "C", [1, 0])
    store.build()
    for i in range(1, 12):
        store.insert((20 - i, 0), "C", [i, 5 * i])
        store.insert((40 - i, 0), "C", [-i, 5 * i])
    assert len({e.alpha for e in store.entries("C")}) > 3
    rng = np.random.default_rng(0)
    for q in rng.uniform(-1, 1, size=300):
        for k in (1, 3, 11, 12, 13):
            got = [e.key for e in store.topk_by_pivot(q, k, "C")]
            assert got == scalar_oracle(store.entries("C"), q, k)

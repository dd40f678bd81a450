"""Acceptance criteria; each check logs a PASS/FAIL line in the terminal summary."""

import itertools
import random
import time

import numpy as np
import pytest
from corpus_gen import write_java_corpus, write_query_file
from oracles import fixture_fragments, fixture_store, mode_vote, reference_review
from pipeline import ARTIFACTS, run_pipeline, write_config
from test_pv import fd_gradient, oracle_loss, rel_err

from sodefect.bench import bench_compare, synthetic_bench_stores
from sodefect.defect import estimate_post
from sodefect.ingest import PostType, SOPost, load_training_corpus
from sodefect.pv import TrainingConfig, infer_vector, nearest_docs, negative_sampling_loss, train
from sodefect.review import majority_vote, review_file
from sodefect.sentiment import Sentiment, SentimentScore, analyze, decide
from sodefect.vectorstore import VectorStore
from sodefect.winnowing import DEFAULT_K, DEFAULT_W, fingerprint


def record(log, name, ok, detail):
    log.append((name, bool(ok), detail))
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, detail


# ---------------------------------------------------------------- 1

NARRATIVES = {
    Sentiment.POSITIVE: "This works great, thanks!",
    Sentiment.NEGATIVE: "It crashes with an error, totally broken.",
    Sentiment.NEUTRAL: "How do I read the file line by line?",
}

# (post type, score) -> delta for Positive, Negative, Neutral narratives, derived by hand:
# questions above 1 are defective outright; lower ones follow the narrative;
# answers take min(1 if score > 1.9 else -1, narrative score).
DECISION_TABLE = {
    ("Question", -3): (1, -1, 300),
    ("Question", 0): (1, -1, 300),
    ("Question", 1): (1, -1, 300),
    ("Question", 2): (-1, -1, -1),
    ("Question", 5): (-1, -1, -1),
    ("Answer", -3): (-1, -1, -1),
    ("Answer", 0): (-1, -1, -1),
    ("Answer", 1): (-1, -1, -1),
    ("Answer", 2): (1, -1, 1),
    ("Answer", 5): (1, -1, 1),
}


def test_ac01_decision_table(acceptance_log):
    for s, text in NARRATIVES.items():
        assert decide(analyze(text)) is s
    agree = total = 0
    for (ptype, score), expected in DECISION_TABLE.items():
        post = SOPost(1, PostType(ptype), score, ("java",), "t", "")
        for s, want in zip((Sentiment.POSITIVE, Sentiment.NEGATIVE, Sentiment.NEUTRAL), expected):
            total += 1
            agree += estimate_post(post, NARRATIVES[s]) == want
    record(acceptance_log, "AC01 decision table", agree == total == 30, f"{agree}/{total} cases")


# ---------------------------------------------------------------- 2


def test_ac02_decision_grid(acceptance_log):
    bad = []
    points = 0
    for i in range(101):
        for j in range(101 - i):
            n = 100 - i - j
            points += 1
            clauses = [
                ("P", i >= 50 and i > j),
                ("N", j >= 50 and j > i),
                ("U", n >= 50 and i < 50 and j < 50),
            ]
            hits = [c for c, ok in clauses if ok]
            want = {"P": Sentiment.POSITIVE, "N": Sentiment.NEGATIVE}.get(hits[0] if hits else "U", Sentiment.NEUTRAL)
            got = decide(SentimentScore(i / 100, j / 100, n / 100))
            if len(hits) > 1 or got is not want:
                bad.append((i, j, n, got))
    record(acceptance_log, "AC02 decision grid", not bad and points == 5151,
           f"{points - len(bad)}/{points} grid points, boundaries at 0.50")


# ---------------------------------------------------------------- 3


def test_ac03_gradient_check(acceptance_log):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    n = 120
    for _ in range(n):
        dim, vocab = int(rng.integers(4, 12)), int(rng.integers(6, 15))
        doc = rng.normal(size=dim)
        out = rng.normal(size=(vocab, dim)) * 0.5
        target = int(rng.integers(vocab))
        negs = [int(x) for x in rng.integers(0, vocab, size=int(rng.integers(1, 6)))]
        _, g_doc, g_out = negative_sampling_loss(doc, out, target, negs)
        worst = max(
            worst,
            rel_err(g_doc, fd_gradient(lambda d: oracle_loss(d, out, target, negs), doc)),
            rel_err(g_out, fd_gradient(lambda o: oracle_loss(doc, o, target, negs), out)),
        )
    elapsed = time.perf_counter() - start
    record(acceptance_log, "AC03 gradient check", worst <= 1e-4 and elapsed < 10,
           f"{n} triples, max rel err {worst:.2e} (<= 1e-4), {elapsed:.1f}s (< 10s)")


# ---------------------------------------------------------------- 4


def test_ac04_self_retrieval(acceptance_log, tmp_path):
    corpus = load_training_corpus(write_java_corpus(tmp_path / "c", 100, seed=11), "Java")
    start = time.perf_counter()
    model = train(corpus, TrainingConfig(vector_size=32, epochs=40, seed=1))
    hits = sum(
        int(nearest_docs(model, infer_vector(model, toks))[0] == i) for i, (_, toks) in enumerate(corpus.documents)
    )
    elapsed = time.perf_counter() - start
    record(acceptance_log, "AC04 self-retrieval", hits >= 80 and elapsed < 60,
           f"{hits}/100 ranked first (>= 80), {elapsed:.1f}s (< 60s)")


# ---------------------------------------------------------------- 5


def test_ac05_pivot_index(acceptance_log):
    rng = np.random.default_rng(5)
    agree = total = 0
    for s in range(1000):
        n = 10_000 if s % 100 == 0 else int(np.exp(rng.uniform(0, np.log(10_000))))
        # small integer 2-d vectors: many exact duplicates, hence alpha ties
        vecs = rng.integers(-3, 4, size=(n, 2)).astype(np.float32)
        vecs[~vecs.any(axis=1)] = (1, 0)
        keys = [(int(p), int(f)) for p, f in zip(rng.permutation(n * 2)[:n], rng.integers(0, 3, size=n))]
        keys = list(dict.fromkeys(keys))
        vecs = vecs[: len(keys)]
        store = VectorStore(2)
        first = min(range(len(keys)), key=lambda i: keys[i])
        store.add(keys[first], "C", vecs[first])
        store.build()
        rest = [i for i in range(len(keys)) if i != first]
        if rest:
            store.insert_many([keys[i] for i in rest], "C", vecs[rest])
        store.freeze()
        entries = [(e.alpha, e.key) for e in store.entries("C")]
        for _ in range(3):
            alpha = float(rng.choice([e[0] for e in entries])) if rng.random() < 0.5 else float(rng.uniform(-1, 1))
            k = int(rng.integers(1, 20))
            want = [key for _, key in sorted(entries, key=lambda e: (abs(e[0] - alpha), e[1]))[:k]]
            got = [e.key for e in store.topk_by_pivot(alpha, k, "C")]
            total += 1
            agree += got == want
    record(acceptance_log, "AC05 pivot index", agree == total,
           f"{agree}/{total} queries over 1000 stores match the exhaustive scan")


# ---------------------------------------------------------------- 6


def test_ac06_pipeline_oracle(acceptance_log, small_model, tmp_path):
    store, vectors, scores = fixture_store(small_model, fixture_fragments(500, seed=21))
    agree = 0
    for q in range(100):
        path = write_query_file(tmp_path / f"Q{q}.java", seed=1000 + q, n_methods=1 + q % 3)
        report = review_file(path, "Java", small_model, store)
        votes, verdict = reference_review(path.read_text(), "Java", small_model, vectors, scores, 5)
        agree += report.verdict == verdict and sorted(report.votes) == sorted(votes)
    record(acceptance_log, "AC06 pipeline oracle", agree == 100,
           f"{agree}/100 query files agree with the index-free recomputation")


# ---------------------------------------------------------------- 7


def test_ac07_winnowing_guarantee(acceptance_log):
    rng = random.Random(7)
    alphabet = "abcdefghijklmnopqrstuvwxyz0123456789(){};=+- "
    rand = lambda n: "".join(rng.choice(alphabet) for _ in range(n))  # noqa: E731
    shared = 0
    for _ in range(1000):
        common = rand(rng.randint(DEFAULT_W + DEFAULT_K - 1, 40))
        a = rand(rng.randint(0, 200)) + common + rand(rng.randint(0, 200))
        b = rand(rng.randint(0, 200)) + common + rand(rng.randint(0, 200))
        shared += bool(fingerprint(a).hash_set() & fingerprint(b).hash_set())
    record(acceptance_log, "AC07 winnowing guarantee", shared == 1000,
           f"{shared}/1000 planted pairs share a hash (k={DEFAULT_K}, w={DEFAULT_W})")


# ---------------------------------------------------------------- 8


@pytest.fixture(scope="module")
def bench_report(tmp_path_factory):
    store, fps, texts, vectors = synthetic_bench_stores(100_000, dim=100, seed=0)
    picks = random.Random(0).sample(range(len(texts)), 3)
    report = bench_compare(store, fps, [(texts[i], vectors[i]) for i in picks], "Java",
                           repeats=20, workdir=tmp_path_factory.mktemp("bench"))
    return report, float(np.mean([len(t) for t in texts]))


def test_ac08a_storage_ratio(acceptance_log, bench_report):
    report, avg_chars = bench_report
    ratio = report.storage_ratio
    record(acceptance_log, "AC08a storage ratio", ratio <= 0.2 and avg_chars >= 300,
           f"vector/fingerprint bytes {ratio:.3f} (<= 0.2; {100 * (1 - ratio):.2f}% reduction) "
           f"at {avg_chars:.0f} chars/fragment")


def test_ac08b_latency_ratio(acceptance_log, bench_report):
    report, _ = bench_report
    ratio = report.latency_ratio
    record(acceptance_log, "AC08b latency ratio", ratio <= 0.1,
           f"median pivot/fingerprint latency {ratio:.2e} (<= 0.1; {100 * (1 - ratio):.2f}% reduction), "
           f"{report.vector.latency_p50 * 1e6:.0f} us vs {report.fingerprint.latency_p50 * 1e3:.0f} ms")


# ---------------------------------------------------------------- 9


def test_ac09_cli_determinism(acceptance_log, tmp_path, posts_dump, java_corpus_dir):
    config = write_config(tmp_path / "run.ini")
    query = write_query_file(tmp_path / "Query.java", seed=8)
    a = run_pipeline(tmp_path / "a", posts_dump, java_corpus_dir, query, config)
    b = run_pipeline(tmp_path / "b", posts_dump, java_corpus_dir, query, config)
    same = [rel for rel in ARTIFACTS if (a / rel).read_bytes() == (b / rel).read_bytes()]
    record(acceptance_log, "AC09 CLI determinism", len(same) == len(ARTIFACTS),
           f"{len(same)}/{len(ARTIFACTS)} artifacts byte-identical across two runs")


# ---------------------------------------------------------------- 10


def test_ac10_mode_vote(acceptance_log):
    rng = random.Random(10)
    fixed = [([-1, -1, 1, 300, -1], -1), ([1, 1, -1, -1, 300], -1), ([300, 300, 1], 300)]
    ok_fixed = all(majority_vote(z) == want for z, want in fixed)
    ok = 0
    for _ in range(10_000):
        z = rng.choices([-1, 1, 300], k=rng.randint(1, 25))
        v = majority_vote(z)
        perm = list(z)
        rng.shuffle(perm)
        ok += v in z and majority_vote(perm) == v and v == mode_vote(z)
    # every tie pattern explicitly
    ties = all(
        majority_vote(list(itertools.chain(*([x] * 2 for x in combo)))) == min(combo, key=(-1, 300, 1).index)
        for r in (2, 3)
        for combo in itertools.combinations([-1, 300, 1], r)
    )
    record(acceptance_log, "AC10 mode vote", ok_fixed and ties and ok == 10_000,
           f"{ok}/10000 random multisets, fixed cases {'ok' if ok_fixed else 'wrong'}, "
           f"tie order {'ok' if ties else 'wrong'}")

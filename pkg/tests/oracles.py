"""Index-free reference implementations used to check the real pipeline."""

from __future__ import annotations

import random

import numpy as np
from corpus_gen import TOPICS, java_method

from sodefect.functions import extract_functions
from sodefect.preproc import preprocess
from sodefect.pv import infer_vector
from sodefect.vectorstore import ScoredPost, VectorStore


def cos64(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.dot(a, b) / (np.sqrt(np.dot(a, a)) * np.sqrt(np.dot(b, b))))


def mode_vote(votes) -> int:
    """Most frequent value; among equally frequent values -1 beats 300 beats 1."""
    if not votes:
        raise ValueError("empty")
    best = None
    for value in (-1, 300, 1):  # preference order, earliest wins ties
        c = list(votes).count(value)
        if c and (best is None or c > best[0]):
            best = (c, value)
    return best[1]


def scalar_topk(alpha: float, entries: dict, k: int) -> list:
    """Keys of the k entries whose alpha is nearest ``alpha``; ties by key."""
    return sorted(entries, key=lambda key: (abs(entries[key] - alpha), key))[:k]


def reference_review(source, language, model, vectors: dict, scores: dict, k: int, seed=None):
    """Full review recomputed by brute force: returns (votes, verdict)."""
    ref_key = min(vectors)
    ref = vectors[ref_key]
    alphas = {key: cos64(v, ref) for key, v in vectors.items()}
    votes = []
    for unit in extract_functions(source, language):
        vec = infer_vector(model, preprocess(unit.body_text, language), seed=seed).values
        for key in scalar_topk(cos64(vec, ref), alphas, k):
            votes.append(scores[key])
    return votes, mode_vote(votes)


def fixture_fragments(n: int, seed: int):
    """``n`` Java method fragments with keys and a skewed mix of scores."""
    rng = random.Random(seed)
    out = []
    for i in range(n):
        topic = TOPICS[rng.randrange(len(TOPICS))]
        code = java_method(rng, topic, f"{topic[0]}{i}")
        delta = rng.choices([-1, 1, 300], weights=[5, 3, 2])[0]
        out.append(((1000 + i, rng.randrange(3)), code, delta))
    return out


def fixture_store(model, fragments):
    """Store plus the raw vectors/scores dicts the oracle consumes."""
    store = VectorStore(model.dim)
    vectors, scores = {}, {}
    for key, code, delta in fragments:
        vec = infer_vector(model, preprocess(code, "Java")).values
        store.add(key, "Java", vec)
        vectors[key] = vec
        scores[key] = delta
    store.set_scores({k: ScoredPost(d, f"post {k[0]}") for k, d in scores.items()})
    store.freeze()
    return store, vectors, scores

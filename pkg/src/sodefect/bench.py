"""Latency and storage comparison: vector store + pivot vs fingerprints + scan."""

from __future__ import annotations

import json
import random
import statistics
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .vectorstore import INDEX_FILE, REFERENCE_FILE, VECTORS_FILE, VectorStore
from .winnowing import FingerprintStore, fingerprint_text


class BenchError(ValueError):
    pass


@dataclass
class PipelineStats:
    bytes: int
    latency_p50: float
    latency_p90: float
    latency_max: float


@dataclass
class BenchReport:
    fragments: int
    queries: int
    repeats: int
    vector: PipelineStats
    fingerprint: PipelineStats

    @property
    def latency_ratio(self) -> float:
        return self.vector.latency_p50 / self.fingerprint.latency_p50

    @property
    def storage_ratio(self) -> float:
        return self.vector.bytes / self.fingerprint.bytes

    def to_json(self) -> dict:
        d = asdict(self)
        d["latencyRatio"] = self.latency_ratio
        d["storageRatio"] = self.storage_ratio
        d["timeReductionPct"] = 100.0 * (1.0 - self.latency_ratio)
        d["storageReductionPct"] = 100.0 * (1.0 - self.storage_ratio)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def _stats(nbytes: int, per_query: list[float]) -> PipelineStats:
    q = np.quantile(per_query, [0.5, 0.9])
    return PipelineStats(nbytes, float(q[0]), float(q[1]), float(max(per_query)))


def _time(fn, repeats: int) -> float:
    runs = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs)


def vector_store_bytes(store: VectorStore, directory: Path) -> int:
    store.save(directory)
    return sum((directory / f).stat().st_size for f in (VECTORS_FILE, INDEX_FILE, REFERENCE_FILE))


def fingerprint_store_bytes(fps: FingerprintStore, directory: Path) -> int:
    path = directory / "fingerprints.jsonl"
    fps.save(path)
    return path.stat().st_size


def bench_compare(
    store: VectorStore,
    fps: FingerprintStore,
    queries: Sequence[tuple[str, np.ndarray]],
    language: str,
    k: int = 5,
    repeats: int = 20,
    workdir: str | Path | None = None,
) -> BenchReport:
    """Time both retrieval paths per query (median of ``repeats``) and size both stores.

    ``queries`` pairs each query's source text (for fingerprinting) with its
    already-inferred vector, so model inference is excluded from both sides.
    """
    if len(store) == 0 or len(fps) == 0:
        raise BenchError("empty corpus")
    if not queries:
        raise BenchError("no queries")
    vec_lat, fp_lat = [], []
    for text, vector in queries:
        vec_lat.append(_time(lambda: store.topk_by_pivot(store.reference_alpha(language, vector), k, language), repeats))
        fp_lat.append(_time(lambda: fps.match(fingerprint_text(text), k), repeats))
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        tmp = Path(tmp)
        (tmp / "vec").mkdir()
        (tmp / "fp").mkdir()
        vbytes = vector_store_bytes(store, tmp / "vec")
        fbytes = fingerprint_store_bytes(fps, tmp / "fp")
    return BenchReport(
        fragments=len(store),
        queries=len(queries),
        repeats=repeats,
        vector=_stats(vbytes, vec_lat),
        fingerprint=_stats(fbytes, fp_lat),
    )


# --------------------------------------------------------------------------
# synthetic corpora for desk-scale benchmarks

_KEYWORDS = ["int", "for", "while", "if", "else", "return", "static", "void", "new", "null", "this", "public"]
_PUNCT = ["(", ")", "{", "}", ";", "=", "+", "-", "<", ">", "[", "]", ",", ".", "*"]


def synthetic_fragment(rng: random.Random, min_chars: int = 300, max_chars: int = 420) -> str:
    """Code-looking text of a random length in [min_chars, max_chars)."""
    target = rng.randrange(min_chars, max_chars)
    parts: list[str] = []
    size = 0
    while size < target:
        r = rng.random()
        if r < 0.3:
            tok = rng.choice(_KEYWORDS)
        elif r < 0.7:
            tok = "v" + format(rng.getrandbits(20), "x")
        elif r < 0.8:
            tok = str(rng.randrange(1000))
        else:
            tok = rng.choice(_PUNCT)
        parts.append(tok)
        size += len(tok) + 1
    return " ".join(parts)[:target]


def synthetic_bench_stores(n: int, dim: int = 100, language: str = "Java", seed: int = 0):
    """(vector store, fingerprint store, texts, vectors) over ``n`` synthetic fragments."""
    rng = random.Random(seed)
    nrng = np.random.default_rng(seed)
    texts = [synthetic_fragment(rng) for _ in range(n)]
    vectors = nrng.standard_normal((n, dim)).astype(np.float32)
    keys = [(i + 1, 0) for i in range(n)]
    store = VectorStore(dim)
    store.add(keys[0], language, vectors[0])
    store.choose_reference(language)
    store.insert_many(keys[1:], language, vectors[1:])
    store.freeze()
    fps = FingerprintStore()
    for key, text in zip(keys, texts):
        fps.add(key, fingerprint_text(text))
    return store, fps, texts, vectors

"""Paragraph vectors: PV-DBOW with negative sampling.

Each document vector is trained to predict the tokens of its document
against ``negatives`` noise tokens drawn from the unigram^0.75
distribution. Output weights start at zero and document/word vectors
uniform in [-0.5/dim, 0.5/dim], so a zero-epoch model is exactly its
initialization.

Training runs in one of two modes. With ``workers=1`` it is bit
reproducible for a fixed seed. With ``workers>1`` documents are split
into chunks whose threads update the shared matrices without locking,
which trades reproducibility for throughput.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numba
import numpy as np

from .ingest import CorpusManifest

FORMAT_MAGIC = b"SODPVEC\x00"
FORMAT_VERSION = 1


class ModelError(ValueError):
    pass


class ModelFormatError(ModelError):
    pass


@dataclass(frozen=True)
class TrainingConfig:
    vector_size: int = 100
    epochs: int = 20
    max_samples: int = 1_000_000
    window: int = 5  # unused by pure DBOW; kept for config parity
    negatives: int = 5
    alpha: float = 0.025
    min_alpha: float = 0.0001
    min_count: int = 2
    seed: int = 1
    infer_epochs: int = 50
    workers: int = 1

    def __post_init__(self):
        if self.vector_size < 2:
            raise ValueError("vector_size must be >= 2")
        if self.epochs < 0 or self.infer_epochs < 1:
            raise ValueError("epochs must be >= 0 and infer_epochs >= 1")
        if self.max_samples < 1 or self.window < 1 or self.workers < 1:
            raise ValueError("max_samples, window and workers must be positive")
        if self.negatives < 0 or self.min_count < 0:
            raise ValueError("negatives and min_count must be non-negative")
        if not (0 < self.min_alpha <= self.alpha):
            raise ValueError("need 0 < min_alpha <= alpha")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class DocVector:
    values: np.ndarray
    low_confidence: bool = False

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class PVModel:
    language: str
    config: TrainingConfig
    vocab: list[str]
    counts: np.ndarray
    word_vectors: np.ndarray
    output_weights: np.ndarray
    doc_vectors: np.ndarray
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.index = {tok: i for i, tok in enumerate(self.vocab)}
        self._cum_table = None

    @property
    def dim(self) -> int:
        return self.config.vector_size

    @property
    def cum_table(self) -> np.ndarray:
        if self._cum_table is None:
            self._cum_table = np.cumsum(self.counts.astype(np.float64) ** 0.75)
        return self._cum_table

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        idx = self.index
        return np.array([idx[t] for t in tokens if t in idx], dtype=np.int32)

    def equals(self, other: "PVModel") -> bool:
        return (
            self.language == other.language
            and self.config == other.config
            and self.vocab == other.vocab
            and np.array_equal(self.counts, other.counts)
            and all(
                a.dtype == b.dtype and a.tobytes() == b.tobytes()
                for a, b in [
                    (self.word_vectors, other.word_vectors),
                    (self.output_weights, other.output_weights),
                    (self.doc_vectors, other.doc_vectors),
                ]
            )
        )


# --------------------------------------------------------------------------
# reference maths (float64, used by the gradient check)


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def negative_sampling_loss(doc: np.ndarray, out: np.ndarray, target: int, negatives: Sequence[int]):
    """Loss and analytic gradients for one (doc, target, negatives) triple.

    L = -log s(d.u_target) - sum_k log s(-d.u_k)

    Returns ``(loss, grad_doc, grad_out)`` where ``grad_out`` has the shape
    of ``out`` (repeated negatives accumulate).
    """
    doc = np.asarray(doc, dtype=np.float64)
    out = np.asarray(out, dtype=np.float64)
    rows = [int(target), *map(int, negatives)]
    labels = np.zeros(len(rows))
    labels[0] = 1.0
    scores = out[rows] @ doc
    loss = -_log_sigmoid(scores[0]) - _log_sigmoid(-scores[1:]).sum()
    err = 1.0 / (1.0 + np.exp(-scores)) - labels  # dL/dscore
    grad_doc = err @ out[rows]
    grad_out = np.zeros_like(out)
    np.add.at(grad_out, rows, np.outer(err, doc))
    return float(loss), grad_doc, grad_out


# --------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True, nogil=True)
def _log1pexp(x):
    if x > 0:
        return x + np.log1p(np.exp(-x))
    return np.log1p(np.exp(x))


@numba.njit(cache=True, nogil=True)
def _pair_update(doc, out, rows, n_rows, alpha, update_out, neu1e):
    """One SGD step on a (doc, target, negatives) triple; rows[0] is the target.

    Returns the pre-update loss. ``neu1e`` is scratch space of length dim.
    """
    dim = doc.shape[0]
    for i in range(dim):
        neu1e[i] = 0.0
    loss = 0.0
    for j in range(n_rows):
        t = rows[j]
        f = 0.0
        for i in range(dim):
            f += doc[i] * out[t, i]
        if j == 0:
            loss += _log1pexp(-f)
            label = 1.0
        else:
            loss += _log1pexp(f)
            label = 0.0
        g = (label - 1.0 / (1.0 + np.exp(-f))) * alpha
        for i in range(dim):
            neu1e[i] += g * out[t, i]
        if update_out:
            for i in range(dim):
                out[t, i] += g * doc[i]
    for i in range(dim):
        doc[i] += neu1e[i]
    return loss


@numba.njit(cache=True, nogil=True)
def _dbow_pass(doc_rows, flat, offsets, docs, out, cum, negatives, alpha0, alpha1,
               progress0, progress_span, chunk_words, rng_state, update_out):
    """One pass over ``doc_rows``; returns (loss_sum, n_pairs).

    The learning rate decays linearly from alpha0 at global progress 0 to
    alpha1 at progress 1; this pass covers [progress0, progress0 + span].
    """
    dim = docs.shape[1]
    neu1e = np.empty(dim, dtype=docs.dtype)
    rows = np.empty(negatives + 1, dtype=np.int64)
    total = cum[-1] if cum.shape[0] > 0 else 0.0
    mul = np.uint64(25214903917)
    add = np.uint64(11)
    state = rng_state[0]
    done = 0
    loss_sum = 0.0
    n_pairs = 0
    denom = max(chunk_words, 1)
    for r in range(doc_rows.shape[0]):
        d = doc_rows[r]
        for p in range(offsets[d], offsets[d + 1]):
            progress = progress0 + progress_span * done / denom
            alpha = alpha0 - (alpha0 - alpha1) * progress
            if alpha < alpha1:
                alpha = alpha1
            target = flat[p]
            rows[0] = target
            n_rows = 1
            for _k in range(negatives):
                state = state * mul + add
                u = ((state >> np.uint64(16)) & np.uint64(0xFFFFFFFF)) / 4294967296.0
                s = np.searchsorted(cum, u * total, side="right")
                if s >= cum.shape[0]:
                    s = cum.shape[0] - 1
                if s == target:
                    continue
                rows[n_rows] = s
                n_rows += 1
            loss_sum += _pair_update(docs[d], out, rows, n_rows, alpha, update_out, neu1e)
            n_pairs += 1
            done += 1
    rng_state[0] = state
    return loss_sum, n_pairs


# --------------------------------------------------------------------------


def _flatten(encoded: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    offsets = np.zeros(len(encoded) + 1, dtype=np.int64)
    for i, e in enumerate(encoded):
        offsets[i + 1] = offsets[i] + len(e)
    flat = np.concatenate(encoded).astype(np.int32) if encoded else np.zeros(0, np.int32)
    return flat, offsets


def _uniform_init(rng: np.random.Generator, rows: int, dim: int) -> np.ndarray:
    return ((rng.random((rows, dim), dtype=np.float32) - np.float32(0.5)) / np.float32(dim)).astype(np.float32)


def build_vocab(docs: list[list[str]], min_count: int) -> tuple[list[str], np.ndarray]:
    counts: dict[str, int] = {}
    for toks in docs:
        for t in toks:
            counts[t] = counts.get(t, 0) + 1
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return kept, np.array([counts[t] for t in kept], dtype=np.int64)


def init_model(corpus: CorpusManifest, config: TrainingConfig) -> PVModel:
    """Vocabulary plus random initial weights; what train() starts from."""
    docs = corpus.token_lists()[: config.max_samples]
    if not docs:
        raise ModelError("empty corpus")
    vocab, counts = build_vocab(docs, config.min_count)
    if not vocab:
        raise ModelError(f"empty vocabulary after min_count={config.min_count} filter")
    rng = np.random.default_rng(config.seed)
    dim = config.vector_size
    return PVModel(
        language=corpus.language,
        config=config,
        vocab=vocab,
        counts=counts,
        word_vectors=_uniform_init(rng, len(vocab), dim),
        output_weights=np.zeros((len(vocab), dim), dtype=np.float32),
        doc_vectors=_uniform_init(rng, len(docs), dim),
    )


def train(corpus: CorpusManifest, config: TrainingConfig) -> PVModel:
    """Train a PV-DBOW model; ``loss_history`` holds the mean loss per epoch."""
    model = init_model(corpus, config)
    docs = corpus.token_lists()[: config.max_samples]
    flat, offsets = _flatten([model.encode(d) for d in docs])
    n_docs = len(docs)
    words = int(offsets[-1])
    if config.epochs == 0 or words == 0:
        return model
    workers = min(config.workers, n_docs)
    chunks = [np.arange(n_docs, dtype=np.int64)] if workers == 1 else np.array_split(np.arange(n_docs, dtype=np.int64), workers)
    states = [np.array([np.uint64(config.seed * 1000003 + i + 1)], dtype=np.uint64) for i in range(len(chunks))]
    chunk_words = [int(sum(offsets[d + 1] - offsets[d] for d in c)) for c in chunks]
    span = 1.0 / config.epochs
    cum = model.cum_table

    def run(i: int, epoch: int):
        return _dbow_pass(chunks[i], flat, offsets, model.doc_vectors, model.output_weights, cum,
                          config.negatives, config.alpha, config.min_alpha, epoch * span, span,
                          chunk_words[i], states[i], True)

    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for epoch in range(config.epochs):
            if pool is None:
                results = [run(0, epoch)]
            else:
                results = list(pool.map(lambda i: run(i, epoch), range(len(chunks))))
            loss = sum(r[0] for r in results)
            pairs = sum(r[1] for r in results)
            model.loss_history.append(loss / max(pairs, 1))
    finally:
        if pool is not None:
            pool.shutdown()
    return model


def _token_seed(tokens: Sequence[str]) -> int:
    return zlib.crc32("\x1f".join(tokens).encode("utf-8"))


def infer_vector(model: PVModel, tokens: Sequence[str], epochs: int | None = None, seed: int | None = None) -> DocVector:
    """Fit a fresh document vector against the frozen output weights.

    Out-of-vocabulary tokens are ignored. When nothing is left the
    initialized vector is returned with ``low_confidence`` set.
    """
    epochs = model.config.infer_epochs if epochs is None else epochs
    if epochs < 1:
        raise ValueError("epochs must be positive")
    seed = model.config.seed if seed is None else seed
    tseed = _token_seed(tokens)
    rng = np.random.default_rng([seed & 0xFFFFFFFF, tseed])
    vec = _uniform_init(rng, 1, model.dim)
    encoded = model.encode(tokens)
    if len(encoded) == 0:
        return DocVector(vec[0], low_confidence=True)
    flat, offsets = _flatten([encoded])
    state = np.array([np.uint64((seed & 0xFFFFFFFF) * 2654435761 + tseed + 1)], dtype=np.uint64)
    rows = np.zeros(1, dtype=np.int64)
    cfg = model.config
    span = 1.0 / epochs
    for epoch in range(epochs):
        _dbow_pass(rows, flat, offsets, vec, model.output_weights, model.cum_table, cfg.negatives,
                   cfg.alpha, cfg.min_alpha, epoch * span, span, len(encoded), state, False)
    return DocVector(vec[0])


def cosine(a, b) -> float:
    """Cosine similarity; raises ValueError for a zero vector."""
    a = np.asarray(getattr(a, "values", a), dtype=np.float64)
    b = np.asarray(getattr(b, "values", b), dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("undefined similarity: zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def nearest_docs(model: PVModel, vector) -> np.ndarray:
    """Training document indices ordered by descending cosine to ``vector``."""
    v = np.asarray(getattr(vector, "values", vector), dtype=np.float64)
    m = model.doc_vectors.astype(np.float64)
    sims = m @ v / (np.linalg.norm(m, axis=1) * np.linalg.norm(v))
    return np.argsort(-sims, kind="stable")


# --------------------------------------------------------------------------
# persistence
#
# layout: magic(8) | version u32 | header_len u32 | header json |
#         counts int64[V] | word f32[V,D] | out f32[V,D] | docs f32[N,D] | crc32 u32


def save_model(model: PVModel, path: str | os.PathLike) -> None:
    header = json.dumps(
        {
            "language": model.language,
            "config": asdict(model.config),
            "vocab": model.vocab,
            "nDocs": int(model.doc_vectors.shape[0]),
            "lossHistory": [float(x) for x in model.loss_history],
        },
        sort_keys=True,
        ensure_ascii=False,
    ).encode("utf-8")
    body = bytearray()
    body += FORMAT_MAGIC
    body += struct.pack("<II", FORMAT_VERSION, len(header))
    body += header
    body += model.counts.astype("<i8").tobytes()
    for m in (model.word_vectors, model.output_weights, model.doc_vectors):
        body += np.ascontiguousarray(m, dtype="<f4").tobytes()
    body += struct.pack("<I", zlib.crc32(body))
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".model-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path: str | os.PathLike) -> PVModel:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model {path}: {exc}") from exc
    if len(data) < 20 or data[:8] != FORMAT_MAGIC:
        raise ModelFormatError(f"{path}: not a model file (bad magic)")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: model format version {version}, expected {FORMAT_VERSION}")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise ModelFormatError(f"{path}: checksum mismatch (truncated or corrupted)")
    try:
        header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
        config = TrainingConfig(**header["config"])
        vocab = header["vocab"]
        n_vocab, n_docs, dim = len(vocab), header["nDocs"], config.vector_size
        pos = 16 + hlen
        counts = np.frombuffer(data, "<i8", n_vocab, pos).astype(np.int64)
        pos += 8 * n_vocab
        mats = []
        for rows in (n_vocab, n_vocab, n_docs):
            mats.append(np.frombuffer(data, "<f4", rows * dim, pos).reshape(rows, dim).astype(np.float32))
            pos += 4 * rows * dim
        if pos != len(data) - 4:
            raise ValueError("trailing bytes")
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: malformed model: {exc}") from exc
    return PVModel(
        language=header["language"],
        config=config,
        vocab=vocab,
        counts=counts,
        word_vectors=mats[0],
        output_weights=mats[1],
        doc_vectors=mats[2],
        loss_history=list(header["lossHistory"]),
    )

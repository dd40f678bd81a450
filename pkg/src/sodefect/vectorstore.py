"""Fragment vector store with a per-language scalar pivot index.

Every stored vector keeps ``alpha`` = cosine(vector, reference vector of its
language), where the reference is the language's first fragment in
(postId, fragId) order. Retrieval by pivot returns the K entries whose
alpha is closest to the query's alpha, using a sorted array and binary
search. That is a cheap approximation of cosine nearest neighbours, not
an equivalent; :meth:`VectorStore.topk_exact` is the brute-force check.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .languages import LANGUAGES, canonical_language

# Per-language similarity thresholds (mean cosine of matched pairs).
DEFAULT_THRESHOLDS = {
    "C": 0.963,
    "C#": 0.954,
    "Java": 0.97,
    "JavaScript": 0.967,
    "Python": 0.9617,
}

VECTORS_FILE = "vectors.bin"
INDEX_FILE = "index.jsonl"
REFERENCE_FILE = "reference.json"
SCORES_FILE = "scores.jsonl"
STORE_VERSION = 1


class StoreError(ValueError):
    pass


Key = tuple[int, int]


@dataclass(frozen=True)
class IndexedVector:
    post_id: int
    frag_id: int
    language: str
    vector: np.ndarray
    alpha: float

    @property
    def key(self) -> Key:
        return (self.post_id, self.frag_id)


@dataclass(frozen=True)
class ReferenceVector:
    language: str
    vector: np.ndarray
    source_key: Key


@dataclass(frozen=True)
class ScoredPost:
    delta: int
    title: str = ""


def _norm_rows(m: np.ndarray) -> np.ndarray:
    return np.linalg.norm(m.astype(np.float64), axis=1)


def threshold_for(language: str, overrides: dict | None = None) -> float:
    lang = canonical_language(language)
    if overrides and lang in overrides:
        return float(overrides[lang])
    return DEFAULT_THRESHOLDS[lang]


class _Partition:
    """Vectors of one language plus the sorted alpha index over them."""

    def __init__(self, dim: int):
        self.dim = dim
        self.keys: list[Key] = []
        self.rows: list[np.ndarray] = []
        self.alphas: list[float] = []
        self._matrix: np.ndarray | None = None
        # sorted index: alpha ascending, then key
        self.sorted_alpha: np.ndarray = np.zeros(0)
        self.sorted_pos: np.ndarray = np.zeros(0, dtype=np.int64)
        self._dirty = False

    def append(self, key: Key, vec: np.ndarray, alpha: float) -> int:
        self.keys.append(key)
        self.rows.append(vec)
        self.alphas.append(alpha)
        self._matrix = None
        self._dirty = True
        return len(self.keys) - 1

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.vstack(self.rows) if self.rows else np.zeros((0, self.dim), np.float32)
        return self._matrix

    def reindex(self) -> None:
        if not self._dirty:
            return
        a = np.asarray(self.alphas, dtype=np.float64)
        k = np.asarray(self.keys, dtype=np.int64).reshape(-1, 2)
        order = np.lexsort((k[:, 1], k[:, 0], a)) if len(a) else np.zeros(0, dtype=np.int64)
        self.sorted_alpha = a[order]
        self.sorted_pos = order.astype(np.int64)
        self._dirty = False


class VectorStore:
    """In-memory store; build with :meth:`add`/:meth:`build`, then query."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self._parts: dict[str, _Partition] = {}
        self._staged: dict[str, list[tuple[Key, np.ndarray]]] = {}
        self._keys: set[Key] = set()
        self.references: dict[str, ReferenceVector] = {}
        self.scores: dict[Key, ScoredPost] = {}
        self.frozen = False

    # ---------------------------------------------------------------- build

    def _check_vector(self, vector) -> np.ndarray:
        v = np.asarray(getattr(vector, "values", vector), dtype=np.float32).reshape(-1)
        if v.shape[0] != self.dim:
            raise StoreError(f"vector length {v.shape[0]} != store dim {self.dim}")
        if not np.all(np.isfinite(v)):
            raise StoreError("non-finite vector")
        if not np.any(v):
            raise StoreError("zero vector has no defined similarity")
        return v

    def _check_writable(self, key: Key) -> None:
        if self.frozen:
            raise StoreError("store is frozen")
        if key in self._keys:
            raise StoreError(f"duplicate fragment key {key}")

    def add(self, key: Key, language: str, vector) -> None:
        """Stage a vector whose alpha is computed once the reference is chosen."""
        key = (int(key[0]), int(key[1]))
        language = canonical_language(language)
        self._check_writable(key)
        v = self._check_vector(vector)
        if language in self.references:
            self.insert(key, language, v)
            return
        self._staged.setdefault(language, []).append((key, v))
        self._keys.add(key)

    def choose_reference(self, language: str) -> ReferenceVector:
        """Pick the lowest (postId, fragId) vector of a language as its pivot.

        Staged vectors of that language are indexed against it. Once chosen
        the reference never moves, since moving it would invalidate every
        stored alpha.
        """
        language = canonical_language(language)
        if language in self.references:
            return self.references[language]
        staged = self._staged.get(language, [])
        if not staged:
            raise StoreError(f"no vectors for language {language}")
        key, vec = min(staged, key=lambda kv: kv[0])
        ref = ReferenceVector(language, vec.copy(), key)
        self.references[language] = ref
        staged.sort(key=lambda kv: kv[0])
        keys = [k for k, _ in staged]
        mat = np.vstack([v for _, v in staged])
        self._bulk_insert(language, keys, mat)
        del self._staged[language]
        return ref

    def _alphas(self, language: str, mat: np.ndarray) -> np.ndarray:
        ref = self.references[language].vector.astype(np.float64)
        sims = mat.astype(np.float64) @ ref / (_norm_rows(mat) * np.linalg.norm(ref))
        return np.clip(sims, -1.0, 1.0)

    def _bulk_insert(self, language: str, keys: list[Key], mat: np.ndarray) -> None:
        part = self._parts.setdefault(language, _Partition(self.dim))
        for key, v, a in zip(keys, mat, self._alphas(language, mat)):
            part.append(key, v, float(a))
            self._keys.add(key)

    def insert(self, key: Key, language: str, vector) -> IndexedVector:
        """Index one vector; the language's reference must already exist."""
        key = (int(key[0]), int(key[1]))
        language = canonical_language(language)
        if language not in self.references:
            raise StoreError(f"no reference vector chosen for {language}")
        self._check_writable(key)
        v = self._check_vector(vector)
        alpha = float(self._alphas(language, v[None, :])[0])
        part = self._parts.setdefault(language, _Partition(self.dim))
        part.append(key, v, alpha)
        self._keys.add(key)
        return IndexedVector(key[0], key[1], language, v, alpha)

    def insert_many(self, keys, language: str, vectors) -> None:
        """Vectorised :meth:`insert` for bulk loads."""
        language = canonical_language(language)
        if language not in self.references:
            raise StoreError(f"no reference vector chosen for {language}")
        mat = np.asarray(vectors, dtype=np.float32)
        keys = [(int(a), int(b)) for a, b in keys]
        if len(set(keys)) != len(keys) or any(k in self._keys for k in keys):
            raise StoreError("duplicate fragment key")
        if self.frozen:
            raise StoreError("store is frozen")
        if mat.shape != (len(keys), self.dim) or not np.all(np.isfinite(mat)) or np.any(~mat.any(axis=1)):
            raise StoreError("bad vector batch (shape, non-finite or zero rows)")
        self._bulk_insert(language, keys, mat)

    def build(self) -> None:
        """Choose references for every staged language and index the rest."""
        for language in sorted(self._staged):
            self.choose_reference(language)

    def freeze(self) -> "VectorStore":
        self.build()
        for part in self._parts.values():
            part.reindex()
            _ = part.matrix
        self.frozen = True
        return self

    # ---------------------------------------------------------------- query

    def languages(self) -> list[str]:
        return [lang for lang in LANGUAGES if lang in self._parts]

    def __len__(self) -> int:
        return sum(len(p.keys) for p in self._parts.values())

    def __contains__(self, key) -> bool:
        return tuple(key) in self._keys

    def has_entries(self) -> bool:
        """True once anything was added, staged or indexed."""
        return bool(self._keys)

    def size(self, language: str) -> int:
        part = self._parts.get(canonical_language(language))
        return len(part.keys) if part else 0

    def _part(self, language: str) -> _Partition:
        language = canonical_language(language)
        part = self._parts.get(language)
        if part is None or not part.keys:
            raise StoreError(f"store has no vectors for {language}")
        part.reindex()
        return part

    def _entry(self, language: str, part: _Partition, pos: int) -> IndexedVector:
        k = part.keys[pos]
        return IndexedVector(k[0], k[1], language, part.rows[pos], part.alphas[pos])

    def entries(self, language: str) -> list[IndexedVector]:
        language = canonical_language(language)
        part = self._parts.get(language)
        if part is None:
            return []
        return [self._entry(language, part, i) for i in range(len(part.keys))]

    def reference_alpha(self, language: str, query) -> float:
        """Cosine of a query vector with the language's reference vector."""
        language = canonical_language(language)
        if language not in self.references:
            raise StoreError(f"no reference vector for {language}")
        q = np.asarray(getattr(query, "values", query), dtype=np.float64)
        ref = self.references[language].vector.astype(np.float64)
        nq, nr = np.linalg.norm(q), np.linalg.norm(ref)
        if nq == 0.0:
            raise StoreError("undefined similarity: zero query vector")
        return float(np.clip(q @ ref / (nq * nr), -1.0, 1.0))

    def topk_by_pivot(self, alpha: float, k: int, language: str) -> list[IndexedVector]:
        """K entries with stored alpha closest to ``alpha``.

        Ordered by |alpha' - alpha|, ties by (postId, fragId). Two pointers
        walk outwards from the bisection point one equal-alpha run at a
        time until the K-th distance is passed, so ties at the cut-off are
        resolved by key, not by side.
        """
        if k < 1:
            raise ValueError("k must be positive")
        part = self._part(language)
        a = part.sorted_alpha
        n = len(a)
        hi = int(np.searchsorted(a, alpha, side="left"))
        lo = hi - 1
        picked: list[int] = []
        cutoff = None
        while lo >= 0 or hi < n:
            dl = abs(a[lo] - alpha) if lo >= 0 else np.inf
            dr = abs(a[hi] - alpha) if hi < n else np.inf
            d = min(dl, dr)
            # distinct alphas can round to the same distance; take every run
            # tied with the K-th so the key tie-break sees all of them
            if cutoff is not None and d > cutoff:
                break
            if dl == d:
                v = a[lo]
                while lo >= 0 and a[lo] == v:
                    picked.append(lo)
                    lo -= 1
            if dr == d:
                v = a[hi]
                while hi < n and a[hi] == v:
                    picked.append(hi)
                    hi += 1
            if cutoff is None and len(picked) >= k:
                cutoff = d
        pos = part.sorted_pos[picked]
        ranked = sorted(pos, key=lambda p: (abs(part.alphas[p] - alpha), part.keys[p]))
        return [self._entry(canonical_language(language), part, int(p)) for p in ranked[:k]]

    def topk_exact(self, query, k: int, language: str) -> list[tuple[IndexedVector, float]]:
        """K entries with the highest true cosine to ``query`` (brute force)."""
        if k < 1:
            raise ValueError("k must be positive")
        part = self._part(language)
        q = np.asarray(getattr(query, "values", query), dtype=np.float64)
        m = part.matrix.astype(np.float64)
        sims = np.clip(m @ q / (_norm_rows(m) * np.linalg.norm(q)), -1.0, 1.0)
        keys = np.asarray(part.keys, dtype=np.int64).reshape(-1, 2)
        order = np.lexsort((keys[:, 1], keys[:, 0], -sims))[:k]
        lang = canonical_language(language)
        return [(self._entry(lang, part, int(p)), float(sims[p])) for p in order]

    # ---------------------------------------------------------------- scores

    def set_scores(self, scores: dict[Key, ScoredPost]) -> None:
        self.scores = dict(scores)

    def score_of(self, key: Key) -> ScoredPost:
        try:
            return self.scores[key]
        except KeyError:
            raise StoreError(f"fragment {key} has no defectiveness score; run the score step") from None

    # ---------------------------------------------------------------- io

    def save(self, directory: str | os.PathLike) -> None:
        """Write vectors.bin, index.jsonl and reference.json (+ scores.jsonl)."""
        self.build()
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        row = 0
        with open(d / VECTORS_FILE, "wb") as vf, open(d / INDEX_FILE, "w", encoding="utf-8", newline="\n") as jf:
            for lang in self.languages():
                part = self._parts[lang]
                order = sorted(range(len(part.keys)), key=lambda i: part.keys[i])
                for i in order:
                    vf.write(np.asarray(part.rows[i], dtype="<f4").tobytes())
                    pid, fid = part.keys[i]
                    rec = {"postId": pid, "fragId": fid, "language": lang, "alpha": part.alphas[i], "row": row}
                    jf.write(json.dumps(rec, separators=(",", ":")) + "\n")
                    row += 1
        refs = {
            "version": STORE_VERSION,
            "dim": self.dim,
            "references": {
                lang: {
                    "postId": r.source_key[0],
                    "fragId": r.source_key[1],
                    "vector": [float(x) for x in r.vector],
                }
                for lang, r in sorted(self.references.items())
            },
        }
        (d / REFERENCE_FILE).write_text(json.dumps(refs, sort_keys=True) + "\n", encoding="utf-8")
        if self.scores:
            self.save_scores(d)

    def save_scores(self, directory: str | os.PathLike) -> None:
        with open(Path(directory) / SCORES_FILE, "w", encoding="utf-8", newline="\n") as fh:
            for (pid, fid), s in sorted(self.scores.items()):
                rec = {"postId": pid, "fragId": fid, "delta": s.delta, "title": s.title}
                fh.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, directory: str | os.PathLike) -> "VectorStore":
        d = Path(directory)
        for name in (VECTORS_FILE, INDEX_FILE, REFERENCE_FILE):
            if not (d / name).is_file():
                raise StoreError(f"vector store incomplete: missing {d / name}")
        meta = json.loads((d / REFERENCE_FILE).read_text(encoding="utf-8"))
        if meta.get("version") != STORE_VERSION:
            raise StoreError(f"store version {meta.get('version')} != {STORE_VERSION}")
        dim = int(meta["dim"])
        store = cls(dim)
        for lang, r in meta["references"].items():
            store.references[lang] = ReferenceVector(
                lang, np.asarray(r["vector"], dtype=np.float32), (int(r["postId"]), int(r["fragId"]))
            )
        raw = np.fromfile(d / VECTORS_FILE, dtype="<f4")
        if raw.size % dim:
            raise StoreError("vectors.bin length is not a multiple of dim")
        mat = raw.reshape(-1, dim).astype(np.float32)
        with open(d / INDEX_FILE, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                key = (int(rec["postId"]), int(rec["fragId"]))
                if key in store._keys:
                    raise StoreError(f"duplicate key {key} in index")
                lang = rec["language"]
                part = store._parts.setdefault(lang, _Partition(dim))
                part.append(key, mat[int(rec["row"])], float(rec["alpha"]))
                store._keys.add(key)
        if (d / SCORES_FILE).is_file():
            store.scores = load_scores(d / SCORES_FILE)
        return store.freeze()


def load_scores(path: str | os.PathLike) -> dict[Key, ScoredPost]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                r = json.loads(line)
                out[(int(r["postId"]), int(r["fragId"]))] = ScoredPost(int(r["delta"]), r.get("title", ""))
    return out


def build_store(dim: int, items) -> VectorStore:
    """Convenience: stage ``(key, language, vector)`` items and choose references."""
    store = VectorStore(dim)
    for key, language, vector in items:
        store.add(key, language, vector)
    store.build()
    return store

"""Winnowing fingerprints: the variable-length baseline representation.

k-gram hashes are computed with a 64-bit polynomial rolling hash (mixed
through a splitmix finalizer so window minima are well spread), and the
rightmost minimum of every window of ``w`` consecutive hashes is kept.
Any substring of length >= w + k - 1 shared by two inputs therefore
yields at least one shared hash.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .preproc import normalize

DEFAULT_K = 5
DEFAULT_W = 4
_BASE = np.uint64(1_000_003)


class FingerprintError(ValueError):
    pass


@dataclass(frozen=True)
class Fingerprint:
    hashes: tuple[tuple[int, int], ...]  # (hash, position), position ascending
    k: int
    w: int

    def hash_set(self) -> frozenset[int]:
        return frozenset(h for h, _ in self.hashes)

    def __len__(self) -> int:
        return len(self.hashes)


def _mix64(x: np.ndarray) -> np.ndarray:
    x = x ^ (x >> np.uint64(30))
    x = x * np.uint64(0xBF58476D1CE4E5B9)
    x = x ^ (x >> np.uint64(27))
    x = x * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def kgram_hashes(text: str, k: int) -> np.ndarray:
    codes = np.frombuffer(text.encode("utf-32-le"), dtype="<u4").astype(np.uint64)
    n = len(codes) - k + 1
    h = np.zeros(n, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for j in range(k):
            h = h * _BASE + codes[j : j + n]
        return _mix64(h)


def fingerprint(code: str, k: int = DEFAULT_K, w: int = DEFAULT_W) -> Fingerprint:
    """Winnow the k-gram hashes of ``code`` with window ``w``."""
    if k < 1 or w < 1:
        raise FingerprintError("k and w must be positive")
    if len(code) < k:
        raise FingerprintError(f"input below gram size ({len(code)} < {k})")
    hashes = kgram_hashes(code, k)
    if len(hashes) <= w:
        win = hashes[None, :]
    else:
        win = sliding_window_view(hashes, w)
    # rightmost minimum: argmin over the reversed window
    pick = win.shape[1] - 1 - np.argmin(win[:, ::-1], axis=1)
    positions = np.unique(np.arange(len(win)) + pick)
    return Fingerprint(tuple(zip(hashes[positions].tolist(), positions.tolist())), k, w)


def match_score(a: Fingerprint, b: Fingerprint) -> float:
    """Fraction of ``a``'s hashes that also occur in ``b``."""
    if (a.k, a.w) != (b.k, b.w):
        raise FingerprintError(f"fingerprint parameters differ: {(a.k, a.w)} vs {(b.k, b.w)}")
    sa = a.hash_set()
    if not sa:
        return 0.0
    return len(sa & b.hash_set()) / len(sa)


def fingerprint_text(code: str) -> str:
    """Text the baseline fingerprints: the normalized code."""
    return normalize(code)


class FingerprintStore:
    """Fingerprints of stored fragments, matched by exhaustive linear scan."""

    def __init__(self, k: int = DEFAULT_K, w: int = DEFAULT_W):
        self.k, self.w = k, w
        self.keys: list[tuple[int, int]] = []
        self.fingerprints: list[Fingerprint] = []
        self._sets: list[frozenset[int]] = []

    def add(self, key: tuple[int, int], code: str) -> None:
        fp = fingerprint(code, self.k, self.w)
        self.keys.append(key)
        self.fingerprints.append(fp)
        self._sets.append(fp.hash_set())

    def __len__(self) -> int:
        return len(self.keys)

    def match(self, code: str, top: int = 5) -> list[tuple[tuple[int, int], float]]:
        q = fingerprint(code, self.k, self.w).hash_set()
        if not q:
            return []
        scored = []
        for key, s in zip(self.keys, self._sets):
            shared = len(q & s)
            if shared:
                scored.append((-shared / len(q), key))
        scored.sort()
        return [(key, -neg) for neg, key in scored[:top]]

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for (pid, fid), fp in zip(self.keys, self.fingerprints):
                rec = {"postId": pid, "fragId": fid, "k": fp.k, "w": fp.w, "hashes": [h for h, _ in fp.hashes]}
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "FingerprintStore":
        store = None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                r = json.loads(line)
                if store is None:
                    store = cls(int(r["k"]), int(r["w"]))
                # positions are not persisted
                fp = Fingerprint(tuple((int(h), -1) for h in r["hashes"]), int(r["k"]), int(r["w"]))
                store.keys.append((int(r["postId"]), int(r["fragId"])))
                store.fingerprints.append(fp)
                store._sets.append(fp.hash_set())
        return store or cls()

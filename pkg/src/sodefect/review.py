"""File review: match each function against the store and vote on a verdict."""

from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from .defect import DEFECT_SCORES, LIKELY_DEFECTIVE, UNLIKELY_DEFECTIVE, UNPREDICTABLE, label
from .functions import extract_functions
from .languages import canonical_language
from .preproc import preprocess
from .pv import PVModel, cosine, infer_vector
from .vectorstore import StoreError, VectorStore, threshold_for

DEFAULT_K = 5

# Tie-break preference: earlier wins.
TIE_ORDER = (LIKELY_DEFECTIVE, UNPREDICTABLE, UNLIKELY_DEFECTIVE)


class ReviewError(RuntimeError):
    pass


def majority_vote(votes: Iterable[int], conservative: bool = False) -> int:
    """Statistical mode of the votes, ties broken -1 > 300 > 1.

    With ``conservative`` any single -1 vote decides the verdict.
    """
    counts = Counter(votes)
    if not counts:
        raise ReviewError("no matches")
    bad = set(counts) - set(DEFECT_SCORES)
    if bad:
        raise ValueError(f"invalid defectiveness scores {sorted(bad)}")
    if conservative and LIKELY_DEFECTIVE in counts:
        return LIKELY_DEFECTIVE
    top = max(counts.values())
    return next(v for v in TIE_ORDER if counts.get(v) == top)


@dataclass
class MatchRecord:
    function_name: str
    post_id: int
    frag_id: int
    alpha: float
    pivot_distance: float
    similarity: float
    below_threshold: bool
    delta: int
    post_title: str = ""

    def to_json(self) -> dict:
        return {
            "function": self.function_name,
            "postId": self.post_id,
            "fragId": self.frag_id,
            "alpha": self.alpha,
            "pivotDistance": self.pivot_distance,
            "similarity": self.similarity,
            "belowThreshold": self.below_threshold,
            "delta": self.delta,
            "label": label(self.delta).value,
            "title": self.post_title,
        }


@dataclass
class ReviewReport:
    file: str
    language: str
    function_count: int
    matches: list[MatchRecord]
    votes: list[int]
    verdict: int
    threshold: float
    functions: list[dict] = field(default_factory=list)

    @property
    def verdict_label(self) -> str:
        return label(self.verdict).value

    def to_json(self) -> dict:
        return {
            "file": self.file,
            "language": self.language,
            "functionCount": self.function_count,
            "verdict": self.verdict,
            "verdictLabel": self.verdict_label,
            "threshold": self.threshold,
            "votes": self.votes,
            "functions": self.functions,
            "matches": [m.to_json() for m in self.matches],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def render_table(self) -> str:
        lines = [
            f"file:     {self.file}",
            f"language: {self.language}   functions: {self.function_count}   matches: {len(self.matches)}",
            f"verdict:  {self.verdict_label} ({self.verdict})",
            "",
            f"{'function':<24} {'post':>9} {'frag':>4} {'alpha':>8} {'|dalpha|':>9} {'cos':>7} {'delta':>5}  title",
        ]
        for m in self.matches:
            flag = "*" if m.below_threshold else " "
            lines.append(
                f"{m.function_name[:24]:<24} {m.post_id:>9} {m.frag_id:>4} {m.alpha:>8.4f} "
                f"{m.pivot_distance:>9.2e} {m.similarity:>7.4f}{flag}{m.delta:>5}  {m.post_title[:50]}"
            )
        lines.append("")
        lines.append(f"* cosine to the function below the {self.language} threshold {self.threshold}")
        return "\n".join(lines) + "\n"


def review_source(
    source: str,
    language: str,
    model: PVModel,
    store: VectorStore,
    k: int = DEFAULT_K,
    *,
    file: str = "<memory>",
    conservative: bool = False,
    infer_epochs: int | None = None,
    seed: int | None = None,
    thresholds: dict | None = None,
) -> ReviewReport:
    language = canonical_language(language)
    if k < 1:
        raise ValueError("k must be positive")
    if store.size(language) == 0:
        raise StoreError(f"store has no vectors for {language}")
    if language not in store.references:
        raise StoreError(f"store has no reference vector for {language}")
    if model.dim != store.dim:
        raise ReviewError(f"model dim {model.dim} != store dim {store.dim}")
    alpha_hat = threshold_for(language, thresholds)
    units = extract_functions(source, language)
    matches: list[MatchRecord] = []
    votes: list[int] = []
    summaries = []
    for unit in units:
        vec = infer_vector(model, preprocess(unit.body_text, language), epochs=infer_epochs, seed=seed)
        alpha = store.reference_alpha(language, vec)
        found = store.topk_by_pivot(alpha, k, language)
        for entry in found:
            scored = store.score_of(entry.key)
            sim = cosine(vec, entry.vector)
            votes.append(scored.delta)
            matches.append(
                MatchRecord(
                    function_name=unit.name,
                    post_id=entry.post_id,
                    frag_id=entry.frag_id,
                    alpha=entry.alpha,
                    pivot_distance=abs(entry.alpha - alpha),
                    similarity=sim,
                    below_threshold=sim < alpha_hat,
                    delta=scored.delta,
                    post_title=scored.title,
                )
            )
        summaries.append(
            {
                "name": unit.name,
                "startLine": unit.start_line,
                "endLine": unit.end_line,
                "alpha": alpha,
                "lowConfidence": vec.low_confidence,
            }
        )
    matches.sort(key=lambda m: (m.pivot_distance, m.post_id, m.frag_id))
    verdict = majority_vote(votes, conservative=conservative)
    return ReviewReport(
        file=file,
        language=language,
        function_count=len(units),
        matches=matches,
        votes=votes,
        verdict=verdict,
        threshold=alpha_hat,
        functions=summaries,
    )


def review_file(path: str | os.PathLike, language: str, model: PVModel, store: VectorStore, k: int = DEFAULT_K, **kw) -> ReviewReport:
    try:
        with open(path, encoding="utf-8", errors="replace") as fh:
            source = fh.read()
    except OSError as exc:
        raise ReviewError(f"cannot read {path}: {exc}") from exc
    return review_source(source, language, model, store, k, file=os.fspath(path), **kw)

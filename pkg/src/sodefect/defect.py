"""Defectiveness scores for Stack Overflow code fragments.

A fragment's score comes from its post's type and vote score combined with
the sentiment of the narrative that precedes it:

* ``-1`` likely defective
* ``1``  unlikely defective
* ``300`` unpredictable

The large value for a neutral narrative means ``min`` always prefers the
metadata signal over "no opinion".
"""

from __future__ import annotations

import enum
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

from .ingest import PostType, SOPost
from .sentiment import DEFAULT_LEXICON, Sentiment, SentimentLexicon, analyze, decide

LIKELY_DEFECTIVE = -1
UNLIKELY_DEFECTIVE = 1
UNPREDICTABLE = 300
DEFECT_SCORES = (LIKELY_DEFECTIVE, UNLIKELY_DEFECTIVE, UNPREDICTABLE)


class DefectLabel(str, enum.Enum):
    LIKELY_DEFECTIVE = "Likely-defective"
    UNLIKELY_DEFECTIVE = "Unlikely-defective"
    UNPREDICTABLE = "Unpredictable"


_LABELS = {
    LIKELY_DEFECTIVE: DefectLabel.LIKELY_DEFECTIVE,
    UNLIKELY_DEFECTIVE: DefectLabel.UNLIKELY_DEFECTIVE,
    UNPREDICTABLE: DefectLabel.UNPREDICTABLE,
}

_NARRATIVE_SCORES = {
    Sentiment.NEGATIVE: LIKELY_DEFECTIVE,
    Sentiment.POSITIVE: UNLIKELY_DEFECTIVE,
    Sentiment.NEUTRAL: UNPREDICTABLE,
}


@dataclass(frozen=True)
class DefectThresholds:
    question: float = 1.0
    answer: float = 1.9

    def __post_init__(self):
        if not (math.isfinite(self.question) and math.isfinite(self.answer)):
            raise ValueError("thresholds must be finite")


def narrative_score(sentiment: Sentiment) -> int:
    return _NARRATIVE_SCORES[Sentiment(sentiment)]


def label(delta: int) -> DefectLabel:
    try:
        return _LABELS[delta]
    except (KeyError, TypeError):
        raise ValueError(f"defectiveness score must be one of {DEFECT_SCORES}, got {delta!r}") from None


def estimate_from_sentiment(
    post_type: PostType, score: float, sentiment: Sentiment, thresholds: DefectThresholds = DefectThresholds()
) -> int:
    """Decision table behind :func:`estimate_post`, with the sentiment given."""
    post_type = PostType(post_type)
    if post_type is PostType.QUESTION:
        if score > thresholds.question:
            return LIKELY_DEFECTIVE
        # Low-score questions carry no metadata signal; the narrative decides.
        return narrative_score(sentiment)
    base = UNLIKELY_DEFECTIVE if score > thresholds.answer else LIKELY_DEFECTIVE
    return min(base, narrative_score(sentiment))


def estimate_post(
    post: SOPost,
    narrative: str,
    thresholds: DefectThresholds = DefectThresholds(),
    lexicon: SentimentLexicon = DEFAULT_LEXICON,
) -> int:
    """Defectiveness of a fragment in ``post`` whose narrative is ``narrative``."""
    if post.post_type is PostType.QUESTION and post.score > thresholds.question:
        return LIKELY_DEFECTIVE
    return estimate_from_sentiment(post.post_type, post.score, decide(analyze(narrative, lexicon)), thresholds)


@dataclass(frozen=True)
class ScoreStats:
    count: int
    min: float
    max: float
    avg: float
    stddev: float


def score_statistics(posts: Iterable[SOPost]) -> dict[tuple[str, PostType], ScoreStats]:
    """min/max/avg/stddev of vote scores per (language, post type).

    The averages are what the default thresholds were read from; running
    this on another corpus gives thresholds fitted to it.
    """
    groups: dict[tuple[str, PostType], list[int]] = defaultdict(list)
    for p in posts:
        lang = p.language
        if lang is not None:
            groups[(lang, p.post_type)].append(p.score)
    out = {}
    for key, scores in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        out[key] = ScoreStats(
            count=len(scores),
            min=min(scores),
            max=max(scores),
            avg=statistics.fmean(scores),
            stddev=statistics.pstdev(scores),
        )
    return out

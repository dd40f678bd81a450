"""Binary evaluation metrics with Likely-defective as the positive class."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable

from .defect import DefectLabel, label

POSITIVE = DefectLabel.LIKELY_DEFECTIVE


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float | None  # None: no positive predictions
    recall: float | None  # None: no positive ground truth
    f1: float | None
    tp: int
    fp: int
    fn: int
    tn: int
    excluded: int

    def to_json(self) -> dict:
        return asdict(self)


def _as_label(x) -> DefectLabel:
    if isinstance(x, DefectLabel):
        return x
    if isinstance(x, int):
        return label(x)
    return DefectLabel(x)


def compute_metrics(pairs: Iterable[tuple]) -> Metrics:
    """Accuracy/precision/recall/F1 over (predicted, true) label pairs.

    Pairs where either side is Unpredictable are dropped and counted in
    ``excluded``. Labels may be DefectLabel values, their strings, or
    scores in {-1, 1, 300}.
    """
    tp = fp = fn = tn = excluded = 0
    for pred, true in pairs:
        pred, true = _as_label(pred), _as_label(true)
        if DefectLabel.UNPREDICTABLE in (pred, true):
            excluded += 1
            continue
        if pred is POSITIVE:
            if true is POSITIVE:
                tp += 1
            else:
                fp += 1
        elif true is POSITIVE:
            fn += 1
        else:
            tn += 1
    total = tp + fp + fn + tn
    if total == 0:
        raise ValueError("no binary predictions to evaluate")
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return Metrics((tp + tn) / total, precision, recall, f1, tp, fp, fn, tn, excluded)

"""Accuracy, average precision, and confusion matrices over prediction sets.

AP here is uninterpolated precision-at-hit averaging: rank all images by
a class's score (ties by image id), average precision at each true
positive's rank. mAP is the unweighted mean over classes that have at
least one positive; empty classes are excluded and flagged, never
silently zeroed. Report writers repeat these definitions in their
headers because mAP variants are not interchangeable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .predictions import PredictionSet

AP_DEFINITION = "uninterpolated precision-at-hit; ranking ties by image id; empty classes excluded"


def top1_accuracy(preds: PredictionSet) -> float:
    """Fraction of rows whose argmax class equals the true class."""
    if not preds.rows:
        raise ValidationError("cannot score an empty prediction set")
    hits = sum(1 for row in preds.rows if PredictionSet.predicted(row) == row.true_class)
    return hits / len(preds.rows)


@dataclass(frozen=True)
class ApResult:
    per_class: dict[str, float]
    mean: float
    skipped: tuple[str, ...]  # classes with zero positive rows

    def to_dict(self) -> dict:
        return {
            "ap_definition": AP_DEFINITION,
            "mean_ap": self.mean,
            "per_class": dict(sorted(self.per_class.items())),
            "skipped_empty_classes": list(self.skipped),
        }


def mean_ap(preds: PredictionSet) -> ApResult:
    if not preds.rows:
        raise ValidationError("cannot score an empty prediction set")
    per_class: dict[str, float] = {}
    skipped: list[str] = []
    neg_inf = float("-inf")
    for cls in preds.classes:
        positives = {row.image_id for row in preds.rows if row.true_class == cls}
        if not positives:
            skipped.append(cls)
            continue
        ranking = sorted(
            preds.rows,
            key=lambda row: (-row.scores.get(cls, neg_inf), row.image_id),
        )
        hits = 0
        acc = 0.0
        for rank, row in enumerate(ranking, 1):
            if row.image_id in positives:
                hits += 1
                acc += hits / rank
        per_class[cls] = acc / len(positives)
    if not per_class:
        raise ValidationError("every class is empty; nothing to average")
    return ApResult(
        per_class=per_class,
        mean=sum(per_class.values()) / len(per_class),
        skipped=tuple(skipped),
    )


@dataclass(frozen=True)
class ConfusionMatrix:
    """Row-normalized confusion: rows are true classes, columns predictions."""

    classes: tuple[str, ...]
    counts: np.ndarray  # (K, K) int64 tallies
    rates: np.ndarray   # (K, K) float, rows sum to 1 before any diagonal zeroing
    zero_diagonal: bool

    def top_confused(self, k: int = 2) -> dict[str, list[str]]:
        """Per true class, up to k most-confused other classes (for rater negatives)."""
        out: dict[str, list[str]] = {}
        for i, cls in enumerate(self.classes):
            row = self.counts[i].copy()
            row[i] = 0
            ranked = sorted(
                (j for j in range(len(self.classes)) if row[j] > 0),
                key=lambda j: (-row[j], self.classes[j]),
            )
            out[cls] = [self.classes[j] for j in ranked[:k]]
        return out

    def to_csv(self) -> str:
        lines = ["true_class," + ",".join(self.classes)]
        for i, cls in enumerate(self.classes):
            lines.append(cls + "," + ",".join(f"{v:.6f}" for v in self.rates[i]))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "zero_diagonal": self.zero_diagonal,
            "rates": [[float(v) for v in row] for row in self.rates],
            "counts": [[int(v) for v in row] for row in self.counts],
            "top_confused": self.top_confused(),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def confusion_matrix(preds: PredictionSet, zero_diagonal: bool = False) -> ConfusionMatrix:
    """Tally predicted-vs-true and row-normalize.

    zero_diagonal post-zeroes the correct-prediction cells, the usual
    rendering when off-diagonal structure is what matters.
    """
    if not preds.rows:
        raise ValidationError("cannot tally an empty prediction set")
    classes = preds.classes
    pos = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for row in preds.rows:
        counts[pos[row.true_class], pos[PredictionSet.predicted(row)]] += 1
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        rates = np.where(totals > 0, counts / np.maximum(totals, 1), 0.0)
    if zero_diagonal:
        rates = rates.copy()
        np.fill_diagonal(rates, 0.0)
    return ConfusionMatrix(classes=classes, counts=counts, rates=rates,
                           zero_diagonal=zero_diagonal)

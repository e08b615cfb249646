"""Classifier prediction files and the in-memory prediction set.

Files are JSON-lines, one object per image. Scores are either a sparse
map {"scores": {"class": value, ...}} or a dense list {"scores": [...]}
paired with a leading {"classes": [...]} meta line that fixes the column
order. The class universe is the union of the meta list, all score keys,
and all true classes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import ParseError, ValidationError


@dataclass(frozen=True)
class PredictionRow:
    image_id: str
    true_class: str
    scores: dict[str, float]

    def __post_init__(self):
        if not self.scores:
            raise ValidationError(f"row {self.image_id!r}: empty score map")
        for cls, value in self.scores.items():
            if not math.isfinite(value):
                raise ValidationError(f"row {self.image_id!r}: non-finite score for {cls!r}")


class PredictionSet:
    """Immutable rows plus the class universe; argmax ties break by class id."""

    def __init__(self, rows: Sequence[PredictionRow], classes: Iterable[str] = ()):
        self.rows = tuple(rows)
        universe = set(classes)
        for row in self.rows:
            universe.update(row.scores)
            universe.add(row.true_class)
        self.classes = tuple(sorted(universe))
        self._class_set = frozenset(self.classes)
        for row in self.rows:
            if row.true_class not in self._class_set:
                raise ValidationError(f"row {row.image_id!r}: unknown true class")

    def __len__(self) -> int:
        return len(self.rows)

    @staticmethod
    def predicted(row: PredictionRow) -> str:
        return min(row.scores.items(), key=lambda kv: (-kv[1], kv[0]))[0]


def load_predictions(path: str | Path) -> PredictionSet:
    path = Path(path)
    rows: list[PredictionRow] = []
    classes: list[str] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc}", path=str(path), line=lineno) from exc
            if "image_id" not in obj and "classes" in obj:
                if classes:
                    raise ParseError("duplicate classes meta line", path=str(path), line=lineno)
                classes = [str(c) for c in obj["classes"]]
                continue
            try:
                raw_scores = obj["scores"]
                if isinstance(raw_scores, list):
                    if len(raw_scores) != len(classes):
                        raise ParseError(
                            f"dense row has {len(raw_scores)} scores but classes meta "
                            f"line declared {len(classes)}",
                            path=str(path), line=lineno,
                        )
                    scores = {c: float(v) for c, v in zip(classes, raw_scores)}
                else:
                    scores = {str(c): float(v) for c, v in raw_scores.items()}
                row = PredictionRow(
                    image_id=obj["image_id"],
                    true_class=obj["true_class"],
                    scores=scores,
                )
            except ParseError:
                raise
            except (KeyError, TypeError, ValueError, ValidationError) as exc:
                raise ParseError(f"bad prediction row: {exc}", path=str(path), line=lineno) from exc
            rows.append(row)
    return PredictionSet(rows, classes)


def save_predictions(preds: PredictionSet, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"classes": list(preds.classes)}) + "\n")
        for row in preds.rows:
            fh.write(json.dumps({
                "image_id": row.image_id,
                "true_class": row.true_class,
                "scores": {c: row.scores[c] for c in sorted(row.scores)},
            }, sort_keys=True) + "\n")

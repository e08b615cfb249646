"""Confidence-based sample selection for pool-based active learning.

Given classifier scores f_c(x) over an unlabeled pool, a prior P(c) over
classes, and a per-round budget b, each class c receives the
round(b * P(c)) highest-scoring images not yet labeled and not already
taken by a class with a larger quota. Picking the most confident images
(instead of the most uncertain) trades exploration for annotatable
batches: ambiguous low-confidence images are hard for humans too. An
uncertainty policy is included for comparison.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ParseError, ValidationError

_SCORES_MAGIC = b"WSCR"
_SCORES_VERSION = 1


class ScoreMatrix:
    """Dense pool-by-class classifier scores; rejects non-finite entries."""

    def __init__(self, image_ids: Sequence[str], class_ids: Sequence[str], scores: np.ndarray):
        self.image_ids = tuple(image_ids)
        self.class_ids = tuple(class_ids)
        scores = np.asarray(scores, dtype=np.float64)
        if scores.shape != (len(self.image_ids), len(self.class_ids)):
            raise ValidationError(
                f"score matrix shape {scores.shape} does not match "
                f"{len(self.image_ids)} images x {len(self.class_ids)} classes"
            )
        if len(set(self.image_ids)) != len(self.image_ids):
            raise ValidationError("image ids must be unique")
        if len(set(self.class_ids)) != len(self.class_ids):
            raise ValidationError("class ids must be unique")
        if scores.size and not np.isfinite(scores).all():
            bad = int(np.flatnonzero(~np.isfinite(scores).all(axis=1))[0])
            raise ValidationError(f"non-finite score in row for image {self.image_ids[bad]!r}")
        self.scores = scores
        self._col = {c: k for k, c in enumerate(self.class_ids)}

    def column(self, class_id: str) -> np.ndarray:
        if class_id not in self._col:
            raise ValidationError(f"unknown class {class_id!r}")
        return self.scores[:, self._col[class_id]]


@dataclass(frozen=True)
class ClassPrior:
    """Desired class distribution for a selection round; weights sum to 1."""

    weights: dict[str, float]

    def __post_init__(self):
        if not self.weights:
            raise ValidationError("prior must cover at least one class")
        for cls, w in self.weights.items():
            if w < 0:
                raise ValidationError(f"prior weight for {cls!r} is negative")
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"prior weights sum to {total!r}, expected 1.0")

    @classmethod
    def uniform(cls, class_ids: Iterable[str]) -> "ClassPrior":
        ids = list(class_ids)
        return cls({c: 1.0 / len(ids) for c in ids})


@dataclass(frozen=True)
class SamplingBudget:
    """Images per selection round; b is usually a multiple of the seed set."""

    b: int
    round_multiplier: float = 10.0

    def __post_init__(self):
        if self.b < 0:
            raise ValidationError("budget must be >= 0")

    @classmethod
    def for_seed_size(cls, seed_size: int, round_multiplier: float = 10.0) -> "SamplingBudget":
        return cls(b=round(seed_size * round_multiplier), round_multiplier=round_multiplier)


@dataclass
class SelectionResult:
    """Per-class picks for one round, plus any per-class quota shortfall."""

    per_class: dict[str, list[str]]
    round: int = 0
    shortfall: dict[str, int] = field(default_factory=dict)

    def selected_ids(self) -> set[str]:
        return {img for picks in self.per_class.values() for img in picks}

    def total_selected(self) -> int:
        return sum(len(v) for v in self.per_class.values())

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "per_class": {c: list(v) for c, v in self.per_class.items()},
            "shortfall": {c: n for c, n in self.shortfall.items() if n},
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "SelectionResult":
        return cls(
            per_class={c: list(v) for c, v in obj["per_class"].items()},
            round=int(obj.get("round", 0)),
            shortfall={c: int(n) for c, n in obj.get("shortfall", {}).items()},
        )


def class_quotas(prior: ClassPrior, b: int) -> dict[str, int]:
    """Integer per-class quotas from b * P(c).

    Each raw quota is rounded half-up, then the total is repaired to
    exactly b: deficits go to the rounded-down classes with the largest
    fractional remainders, surpluses come off the rounded-up classes
    with the smallest remainders. Ties break by class id so the split is
    reproducible.
    """
    classes = sorted(prior.weights)
    raw = {c: b * prior.weights[c] for c in classes}
    base = {c: math.floor(raw[c]) for c in classes}
    frac = {c: raw[c] - base[c] for c in classes}
    quota = {c: base[c] + (1 if frac[c] >= 0.5 else 0) for c in classes}
    delta = b - sum(quota.values())
    if delta > 0:
        order = sorted(classes, key=lambda c: (frac[c] >= 0.5, -frac[c], c))
        k = 0
        while delta > 0:
            quota[order[k % len(order)]] += 1
            delta -= 1
            k += 1
    elif delta < 0:
        order = sorted(
            (c for c in classes if frac[c] >= 0.5),
            key=lambda c: (frac[c], c),
        )
        k = 0
        while delta < 0 and k < len(order):
            if quota[order[k]] > 0:
                quota[order[k]] -= 1
                delta += 1
            k += 1
        # pathological priors only: strip any remaining surplus deterministically
        k = 0
        while delta < 0:
            c = classes[k % len(classes)]
            if quota[c] > 0:
                quota[c] -= 1
                delta += 1
            k += 1
    return quota


def _id_rank(image_ids: Sequence[str]) -> np.ndarray:
    order = np.argsort(np.array(image_ids))
    rank = np.empty(len(image_ids), dtype=np.int64)
    rank[order] = np.arange(len(image_ids))
    return rank


def select_confident(
    scores: ScoreMatrix,
    prior: ClassPrior,
    budget: SamplingBudget,
    excluded: Iterable[str] = (),
    round_index: int = 0,
) -> SelectionResult:
    """Pick the top-scoring round(b * P(c)) images per class.

    Classes are processed in descending quota order; an image taken by
    one class is unavailable to later ones, and within a class ties
    break by (score desc, image id asc). When the pool runs dry a class
    reports its shortfall instead of failing.
    """
    missing = [c for c in prior.weights if c not in scores._col]
    if missing:
        raise ValidationError(f"prior classes missing from scores: {missing[:5]}")
    excluded = set(excluded)
    quotas = class_quotas(prior, budget.b)
    available = np.array([img not in excluded for img in scores.image_ids], dtype=bool)
    id_rank = _id_rank(scores.image_ids)

    per_class: dict[str, list[str]] = {}
    shortfall: dict[str, int] = {}
    for cls in sorted(quotas, key=lambda c: (-quotas[c], c)):
        need = quotas[cls]
        if need == 0:
            per_class[cls] = []
            continue
        col = scores.column(cls)
        order = np.lexsort((id_rank, -col))  # primary: score desc; secondary: id asc
        picks: list[str] = []
        for i in order:
            if len(picks) == need:
                break
            if available[i]:
                picks.append(scores.image_ids[i])
                available[i] = False
        per_class[cls] = picks
        if len(picks) < need:
            shortfall[cls] = need - len(picks)
    return SelectionResult(per_class=per_class, round=round_index, shortfall=shortfall)


def select_uncertain(
    scores: ScoreMatrix,
    budget: SamplingBudget,
    excluded: Iterable[str] = (),
    round_index: int = 0,
) -> SelectionResult:
    """Comparison policy: pick the b images with the smallest top-two margin.

    Provided to demonstrate why confident selection was preferred: the
    minimal-margin pool is dominated by ambiguous images.
    """
    if scores.scores.shape[1] < 2:
        raise ValidationError("uncertainty sampling needs at least two classes")
    excluded = set(excluded)
    top2 = -np.partition(-scores.scores, 1, axis=1)[:, :2]
    margin = top2[:, 0] - top2[:, 1]
    id_rank = _id_rank(scores.image_ids)
    order = np.lexsort((id_rank, margin))  # margin asc, id asc
    per_class: dict[str, list[str]] = {}
    taken = 0
    argmax = np.argmax(scores.scores, axis=1)
    for i in order:
        if taken == budget.b:
            break
        img = scores.image_ids[i]
        if img in excluded:
            continue
        per_class.setdefault(scores.class_ids[argmax[i]], []).append(img)
        taken += 1
    return SelectionResult(per_class=per_class, round=round_index,
                           shortfall={} if taken == budget.b else {"*": budget.b - taken})


@dataclass(frozen=True)
class YieldRow:
    class_id: str
    selected: int
    true_positives: int
    precision: float | None  # None when nothing was selected

    def precision_str(self) -> str:
        return "n/a" if self.precision is None else f"{self.precision:.4f}"


def yield_curve(
    selection: SelectionResult,
    truth: Mapping[str, str | None],
) -> list[YieldRow]:
    """Per-class precision of a selected batch against known labels.

    ``truth`` maps image id to its actual class or None when the image
    is not of the domain at all. Even top-confidence batches carry real
    false-positive mass; this quantifies it.
    """
    rows = []
    for cls, picks in selection.per_class.items():
        hits = 0
        for img in picks:
            if img not in truth:
                raise ValidationError(f"truth missing for selected image {img!r}")
            if truth[img] == cls:
                hits += 1
        precision = hits / len(picks) if picks else None
        rows.append(YieldRow(class_id=cls, selected=len(picks),
                             true_positives=hits, precision=precision))
    return rows


# ---------------------------------------------------------------------------
# score files: binary (header + float32 rows + sidecar id list) or CSV


def save_scores(scores: ScoreMatrix, path: str | Path, ids_path: str | Path | None = None) -> None:
    path = Path(path)
    ids_path = Path(ids_path) if ids_path is not None else Path(str(path) + ".ids")
    with path.open("wb") as fh:
        fh.write(_SCORES_MAGIC)
        fh.write(struct.pack("<BII", _SCORES_VERSION, len(scores.image_ids), len(scores.class_ids)))
        for cls in scores.class_ids:
            raw = cls.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        fh.write(scores.scores.astype("<f4").tobytes())
    ids_path.write_text("".join(f"{img}\n" for img in scores.image_ids), encoding="utf-8")


def load_scores(path: str | Path, ids_path: str | Path | None = None) -> ScoreMatrix:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _load_scores_csv(path)
    ids_path = Path(ids_path) if ids_path is not None else Path(str(path) + ".ids")
    with path.open("rb") as fh:
        if fh.read(4) != _SCORES_MAGIC:
            raise ParseError("not a score file", path=str(path))
        version, n, k = struct.unpack("<BII", fh.read(9))
        if version != _SCORES_VERSION:
            raise ParseError(f"unsupported score file version {version}", path=str(path))
        class_ids = []
        for _ in range(k):
            (length,) = struct.unpack("<H", fh.read(2))
            class_ids.append(fh.read(length).decode("utf-8"))
        payload = fh.read(4 * n * k)
        if len(payload) != 4 * n * k:
            raise ParseError("truncated score payload", path=str(path))
        matrix = np.frombuffer(payload, dtype="<f4").reshape(n, k)
    if not ids_path.exists():
        raise ValidationError(f"sidecar id list not found: {ids_path}")
    image_ids = ids_path.read_text(encoding="utf-8").splitlines()
    if len(image_ids) != n:
        raise ValidationError(
            f"sidecar lists {len(image_ids)} ids but score file has {n} rows"
        )
    return ScoreMatrix(image_ids, class_ids, matrix)


def _load_scores_csv(path: Path) -> ScoreMatrix:
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty score CSV", path=str(path))
        if not header or header[0] != "image_id":
            raise ParseError("score CSV must start with an 'image_id' column", path=str(path))
        class_ids = header[1:]
        image_ids, rows = [], []
        for lineno, row in enumerate(reader, 2):
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}",
                                 path=str(path), line=lineno)
            image_ids.append(row[0])
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ParseError(str(exc), path=str(path), line=lineno)
    matrix = np.array(rows, dtype=np.float64).reshape(len(image_ids), len(class_ids))
    return ScoreMatrix(image_ids, class_ids, matrix)

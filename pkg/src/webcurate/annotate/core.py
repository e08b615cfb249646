"""Annotation task batching, majority voting, and rater accounting.

Tasks are binary questions ("is this image class c?") grouped into
per-class batches so raters learn one category at a time. Each batch
carries instructional positives of its class and instructional
negatives drawn from the two classes the current model most confuses
with it. Golden tasks with known answers are interleaved at seeded
positions for immediate feedback and quality measurement; they never
enter the exported dataset.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from ..errors import ValidationError
from ..sampler import SelectionResult

DEFAULT_GOLDEN_RATE = 0.1
DEFAULT_RATERS_PER_TASK = 3


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    class_id: str
    image_id: str
    is_golden: bool = False
    golden_answer: bool | None = None
    positives: tuple[str, ...] = ()
    negatives: tuple[tuple[str, str], ...] = ()  # (class_id, image_id)

    def __post_init__(self):
        if self.is_golden and self.golden_answer is None:
            raise ValidationError(f"golden task {self.task_id!r} needs a golden_answer")
        negative_classes = {cls for cls, _ in self.negatives}
        if len(negative_classes) > 2:
            raise ValidationError(
                f"task {self.task_id!r}: negatives span {len(negative_classes)} classes, max 2"
            )

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "class_id": self.class_id,
            "image_id": self.image_id,
            "is_golden": self.is_golden,
            "golden_answer": self.golden_answer,
            "positives": list(self.positives),
            "negatives": [list(pair) for pair in self.negatives],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "AnnotationTask":
        return cls(
            task_id=obj["task_id"],
            class_id=obj["class_id"],
            image_id=obj["image_id"],
            is_golden=bool(obj.get("is_golden", False)),
            golden_answer=obj.get("golden_answer"),
            positives=tuple(obj.get("positives", ())),
            negatives=tuple((c, i) for c, i in obj.get("negatives", ())),
        )


@dataclass(frozen=True)
class Judgment:
    task_id: str
    rater_id: str
    answer: bool
    elapsed_seconds: float = 0.0


@dataclass(frozen=True)
class VoteOutcome:
    task_id: str
    accepted: bool
    votes_for: int
    votes_against: int


@dataclass(frozen=True)
class RaterStats:
    rater_id: str
    golden_seen: int
    golden_correct: int
    error_rate: float | None  # None until the rater has seen a golden
    mean_seconds_per_image: float | None
    judgments: int = 0

    def to_dict(self) -> dict:
        return {
            "rater_id": self.rater_id,
            "golden_seen": self.golden_seen,
            "golden_correct": self.golden_correct,
            "error_rate": self.error_rate,
            "mean_seconds_per_image": self.mean_seconds_per_image,
            "judgments": self.judgments,
        }


def make_batches(
    selection: SelectionResult,
    goldens: Mapping[str, Sequence[tuple[str, bool]]],
    golden_rate: float,
    confusion: Mapping[str, Sequence[str]],
    seed: int,
    *,
    positives_per_class: int = 5,
    negatives_per_confused_class: int = 3,
) -> list[AnnotationTask]:
    """Turn a selection round into per-class task batches.

    Within each class block, ceil(golden_rate * n) golden tasks land at
    seeded-random positions among the n selected images. Instructional
    positives come from the class's own golden pool (known-true images);
    negatives come from the known-true images of its top two confused
    classes. Identical inputs and seed reproduce the identical order.
    """
    if not 0.0 <= golden_rate <= 1.0:
        raise ValidationError(f"golden_rate must be in [0, 1], got {golden_rate}")
    rng = random.Random(seed)
    tasks: list[AnnotationTask] = []
    for class_id, image_ids in selection.per_class.items():
        if not image_ids:
            continue
        positives = tuple(
            img for img, answer in goldens.get(class_id, ()) if answer
        )[:positives_per_class]
        negatives: list[tuple[str, str]] = []
        for confused in list(confusion.get(class_id, ()))[:2]:
            known_true = [img for img, answer in goldens.get(confused, ()) if answer]
            negatives += [(confused, img) for img in known_true[:negatives_per_confused_class]]
        if not negatives:
            raise ValidationError(
                f"no instructional negatives available for class {class_id!r}; "
                "provide confusion info and golden pools for the confused classes"
            )
        n_real = len(image_ids)
        n_golden = math.ceil(golden_rate * n_real) if golden_rate > 0 else 0
        if n_golden > 0:
            pool = list(goldens.get(class_id, ()))
            if not pool:
                raise ValidationError(f"golden_rate > 0 but no goldens for class {class_id!r}")
            if n_golden <= len(pool):
                chosen = rng.sample(pool, n_golden)
            else:
                chosen = rng.choices(pool, k=n_golden)
        else:
            chosen = []
        total = n_real + n_golden
        golden_slots = set(rng.sample(range(total), n_golden)) if n_golden else set()
        real_iter = iter(image_ids)
        golden_iter = iter(chosen)
        for slot in range(total):
            if slot in golden_slots:
                image_id, answer = next(golden_iter)
                tasks.append(AnnotationTask(
                    task_id=f"{class_id}:{slot:04d}",
                    class_id=class_id,
                    image_id=image_id,
                    is_golden=True,
                    golden_answer=answer,
                    positives=positives,
                    negatives=tuple(negatives),
                ))
            else:
                tasks.append(AnnotationTask(
                    task_id=f"{class_id}:{slot:04d}",
                    class_id=class_id,
                    image_id=next(real_iter),
                    positives=positives,
                    negatives=tuple(negatives),
                ))
    return tasks


def aggregate_votes(
    judgments: Iterable[Judgment],
    raters_per_task: int = DEFAULT_RATERS_PER_TASK,
) -> list[VoteOutcome]:
    """Majority-vote each fully judged task; under-judged tasks stay pending.

    A task is decided once exactly ``raters_per_task`` judgments exist;
    acceptance needs a strict majority of yes votes. More judgments than
    raters_per_task means the assignment layer is broken, so that is an
    error rather than a quiet re-vote.
    """
    if raters_per_task < DEFAULT_RATERS_PER_TASK:
        raise ValidationError(f"raters_per_task is configurable upward from "
                              f"{DEFAULT_RATERS_PER_TASK}, got {raters_per_task}")
    by_task: dict[str, list[Judgment]] = {}
    for j in judgments:
        by_task.setdefault(j.task_id, []).append(j)
    majority = raters_per_task // 2 + 1
    outcomes = []
    for task_id in sorted(by_task):
        votes = by_task[task_id]
        raters = {j.rater_id for j in votes}
        if len(raters) != len(votes):
            raise ValidationError(f"task {task_id!r} has repeated raters")
        if len(votes) > raters_per_task:
            raise ValidationError(
                f"task {task_id!r} has {len(votes)} judgments, expected at most {raters_per_task}"
            )
        if len(votes) < raters_per_task:
            continue  # pending
        votes_for = sum(1 for j in votes if j.answer)
        outcomes.append(VoteOutcome(
            task_id=task_id,
            accepted=votes_for >= majority,
            votes_for=votes_for,
            votes_against=len(votes) - votes_for,
        ))
    return outcomes


def partition_tasks(
    tasks: Sequence[AnnotationTask],
    outcomes: Iterable[VoteOutcome],
) -> tuple[list[str], list[str], list[str]]:
    """Split non-golden task ids into (accepted, rejected, pending)."""
    decided = {o.task_id: o.accepted for o in outcomes}
    accepted, rejected, pending = [], [], []
    for task in tasks:
        if task.is_golden:
            continue
        if task.task_id not in decided:
            pending.append(task.task_id)
        elif decided[task.task_id]:
            accepted.append(task.task_id)
        else:
            rejected.append(task.task_id)
    return accepted, rejected, pending


def export_positives(
    outcomes: Iterable[VoteOutcome],
    tasks: Sequence[AnnotationTask],
) -> dict[str, list[str]]:
    """Accepted non-golden images per class; goldens never leave the loop."""
    by_id = {t.task_id: t for t in tasks}
    out: dict[str, list[str]] = {}
    for outcome in outcomes:
        task = by_id.get(outcome.task_id)
        if task is None:
            raise ValidationError(f"outcome references unknown task {outcome.task_id!r}")
        if task.is_golden or not outcome.accepted:
            continue
        out.setdefault(task.class_id, []).append(task.image_id)
    for images in out.values():
        images.sort()
    return out


def rater_report(
    judgments: Iterable[Judgment],
    tasks: Sequence[AnnotationTask],
) -> list[RaterStats]:
    """Per-rater golden accuracy and speed, sorted by rater id."""
    by_id = {t.task_id: t for t in tasks}
    per_rater: dict[str, list[Judgment]] = {}
    for j in judgments:
        if j.task_id not in by_id:
            raise ValidationError(f"judgment references unknown task {j.task_id!r}")
        per_rater.setdefault(j.rater_id, []).append(j)
    stats = []
    for rater_id in sorted(per_rater):
        js = per_rater[rater_id]
        golden = [j for j in js if by_id[j.task_id].is_golden]
        correct = sum(1 for j in golden if j.answer == by_id[j.task_id].golden_answer)
        stats.append(RaterStats(
            rater_id=rater_id,
            golden_seen=len(golden),
            golden_correct=correct,
            error_rate=None if not golden else 1.0 - correct / len(golden),
            mean_seconds_per_image=(
                sum(j.elapsed_seconds for j in js) / len(js) if js else None
            ),
            judgments=len(js),
        ))
    return stats


def relative_error_reduction(base_rate: float, new_rate: float) -> float:
    """(base - new) / base, e.g. 0.285 -> 0.238 is a 16.5% relative cut."""
    if base_rate <= 0:
        raise ValidationError("base error rate must be positive")
    return (base_rate - new_rate) / base_rate


def speed_ratio(base_seconds: float, new_seconds: float) -> float:
    if new_seconds <= 0:
        raise ValidationError("seconds per image must be positive")
    return base_seconds / new_seconds


@dataclass(frozen=True)
class CohortComparison:
    base_error_rate: float
    new_error_rate: float
    relative_error_reduction: float
    base_seconds: float
    new_seconds: float
    speed_ratio: float

    def to_dict(self) -> dict:
        return {
            "base_error_rate": self.base_error_rate,
            "new_error_rate": self.new_error_rate,
            "relative_error_reduction": self.relative_error_reduction,
            "base_seconds_per_image": self.base_seconds,
            "new_seconds_per_image": self.new_seconds,
            "speed_ratio": self.speed_ratio,
        }


def _pooled(stats: Sequence[RaterStats]) -> tuple[float, float]:
    seen = sum(s.golden_seen for s in stats)
    correct = sum(s.golden_correct for s in stats)
    if seen == 0:
        raise ValidationError("cohort has no golden judgments; cannot compare")
    total_judgments = sum(s.judgments for s in stats)
    total_seconds = sum(
        (s.mean_seconds_per_image or 0.0) * s.judgments for s in stats
    )
    return 1.0 - correct / seen, total_seconds / max(total_judgments, 1)


def compare_cohorts(
    base: Sequence[RaterStats],
    new: Sequence[RaterStats],
) -> CohortComparison:
    """Pooled golden-error and speed comparison between two rater cohorts."""
    base_error, base_secs = _pooled(base)
    new_error, new_secs = _pooled(new)
    return CohortComparison(
        base_error_rate=base_error,
        new_error_rate=new_error,
        relative_error_reduction=relative_error_reduction(base_error, new_error),
        base_seconds=base_secs,
        new_seconds=new_secs,
        speed_ratio=speed_ratio(base_secs, new_secs),
    )

"""Durable annotation state: batch assignment, judgment log, snapshots.

One logical writer: every mutation happens under a lock and is appended
to a write-ahead JSON-lines log (flushed and fsynced) before it is
acknowledged, so a crash never loses an acknowledged judgment. A full
snapshot is written every ``snapshot_every`` records; recovery loads the
snapshot and replays the log tail, tolerating a torn final line.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from ..errors import ValidationError, WebcurateError
from .core import AnnotationTask, Judgment, RaterStats, rater_report

LOG_NAME = "judgments.log"
SNAPSHOT_NAME = "snapshot.json"
TASKS_NAME = "tasks.json"


class UnknownTaskError(WebcurateError):
    http_status = 404


class UnknownRaterError(WebcurateError):
    http_status = 404


class NotAssignedError(WebcurateError):
    http_status = 403


class DuplicateJudgmentError(WebcurateError):
    http_status = 409


@dataclass(frozen=True)
class SubmitResult:
    task_id: str
    rater_id: str
    golden_feedback: bool
    correct: bool | None = None
    expected_answer: bool | None = None

    def to_dict(self) -> dict:
        return {
            "recorded": True,
            "task_id": self.task_id,
            "rater_id": self.rater_id,
            "golden_feedback": self.golden_feedback,
            "correct": self.correct,
            "expected_answer": self.expected_answer,
        }


class AnnotationStore:
    def __init__(
        self,
        tasks: Sequence[AnnotationTask],
        data_dir: str | Path,
        *,
        raters_per_task: int = 3,
        urls: Mapping[str, str] | None = None,
        class_names: Mapping[str, str] | None = None,
        snapshot_every: int = 50,
    ):
        if raters_per_task < 1:
            raise ValidationError("raters_per_task must be >= 1")
        self.tasks = list(tasks)
        self.by_id = {t.task_id: t for t in self.tasks}
        if len(self.by_id) != len(self.tasks):
            raise ValidationError("task ids must be unique")
        self.raters_per_task = raters_per_task
        self.urls = dict(urls or {})
        self.class_names = dict(class_names or {})
        self.snapshot_every = snapshot_every
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)

        # batches: contiguous runs of one class, in task order
        self.batches: list[tuple[str, list[str]]] = []
        for task in self.tasks:
            if self.batches and self.batches[-1][0] == task.class_id:
                self.batches[-1][1].append(task.task_id)
            else:
                self.batches.append((task.class_id, [task.task_id]))

        self._lock = threading.RLock()
        self._judgments: dict[tuple[str, str], Judgment] = {}
        self._assigned: dict[str, list[int]] = {}  # rater -> batch indexes, in order
        self._seq = 0
        self._log_path = self.data_dir / LOG_NAME
        self._snapshot_path = self.data_dir / SNAPSHOT_NAME
        self._recover()
        self._log_fh = self._log_path.open("a", encoding="utf-8")
        (self.data_dir / TASKS_NAME).write_text(
            json.dumps([t.to_dict() for t in self.tasks], indent=2, sort_keys=True),
            encoding="utf-8",
        )

    # -- persistence ------------------------------------------------------

    def _recover(self) -> None:
        snap_seq = 0
        if self._snapshot_path.exists():
            snap = json.loads(self._snapshot_path.read_text(encoding="utf-8"))
            snap_seq = int(snap.get("seq", 0))
            for obj in snap.get("judgments", []):
                j = Judgment(obj["task_id"], obj["rater_id"], bool(obj["answer"]),
                             float(obj.get("elapsed_seconds", 0.0)))
                self._judgments[(j.task_id, j.rater_id)] = j
            for rater, indexes in snap.get("assignments", {}).items():
                self._assigned[rater] = [int(i) for i in indexes]
            self._seq = snap_seq
        if not self._log_path.exists():
            return
        with self._log_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    break  # torn tail from a crash; everything before it is intact
                if int(obj.get("seq", 0)) <= snap_seq:
                    continue
                self._seq = int(obj["seq"])
                if obj["type"] == "judgment":
                    j = Judgment(obj["task_id"], obj["rater_id"], bool(obj["answer"]),
                                 float(obj.get("elapsed_seconds", 0.0)))
                    self._judgments[(j.task_id, j.rater_id)] = j
                elif obj["type"] == "assign":
                    self._assigned.setdefault(obj["rater_id"], []).append(int(obj["batch"]))
        unknown = {task_id for task_id, _ in self._judgments} - set(self.by_id)
        if unknown:
            raise ValidationError(
                f"{self.data_dir} holds judgments for unknown tasks "
                f"(e.g. {sorted(unknown)[:3]}); this store was built with a different task set"
            )

    def _append(self, record: dict) -> None:
        self._seq += 1
        record["seq"] = self._seq
        record["recorded_at"] = datetime.now(timezone.utc).isoformat()
        self._log_fh.write(json.dumps(record, sort_keys=True) + "\n")
        self._log_fh.flush()
        os.fsync(self._log_fh.fileno())
        if self._seq % self.snapshot_every == 0:
            self._snapshot()

    def _snapshot(self) -> None:
        state = {
            "seq": self._seq,
            "judgments": [
                {"task_id": j.task_id, "rater_id": j.rater_id, "answer": j.answer,
                 "elapsed_seconds": j.elapsed_seconds}
                for j in self._judgments.values()
            ],
            "assignments": {r: list(idx) for r, idx in self._assigned.items()},
        }
        tmp = self._snapshot_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(state, sort_keys=True), encoding="utf-8")
        tmp.replace(self._snapshot_path)

    def close(self) -> None:
        with self._lock:
            self._snapshot()
            self._log_fh.close()

    # -- queries ----------------------------------------------------------

    def judgments(self) -> list[Judgment]:
        with self._lock:
            return list(self._judgments.values())

    def _batch_raters(self, batch_index: int) -> set[str]:
        return {r for r, idx in self._assigned.items() if batch_index in idx}

    def _rater_finished_batch(self, rater_id: str, batch_index: int) -> bool:
        _, task_ids = self.batches[batch_index]
        return all((t, rater_id) in self._judgments for t in task_ids)

    def batch_payload(self, batch_index: int) -> dict:
        class_id, task_ids = self.batches[batch_index]
        first = self.by_id[task_ids[0]]
        return {
            "batch_id": batch_index,
            "class_id": class_id,
            "class_name": self.class_names.get(class_id, class_id),
            "tasks": [
                {
                    "task_id": t,
                    "image_id": self.by_id[t].image_id,
                    "url": self.urls.get(self.by_id[t].image_id, ""),
                }
                for t in task_ids
            ],
            "positives": [
                {"image_id": img, "url": self.urls.get(img, "")}
                for img in first.positives
            ],
            "negatives": [
                {
                    "class_id": cls,
                    "class_name": self.class_names.get(cls, cls),
                    "image_id": img,
                    "url": self.urls.get(img, ""),
                }
                for cls, img in first.negatives
            ],
        }

    def task_payload(self, task_id: str) -> dict:
        task = self.by_id.get(task_id)
        if task is None:
            raise UnknownTaskError(f"unknown task {task_id!r}")
        # golden status stays server-side; the payload must not leak it
        return {
            "task_id": task.task_id,
            "class_id": task.class_id,
            "image_id": task.image_id,
            "url": self.urls.get(task.image_id, ""),
        }

    # -- mutations ---------------------------------------------------------

    def next_batch(self, rater_id: str) -> dict | None:
        """The rater's current unfinished batch, or a freshly assigned one."""
        if not rater_id:
            raise UnknownRaterError("rater id must be non-empty")
        with self._lock:
            for index in self._assigned.get(rater_id, []):
                if not self._rater_finished_batch(rater_id, index):
                    return self.batch_payload(index)
            for index in range(len(self.batches)):
                if index in self._assigned.get(rater_id, []):
                    continue
                if len(self._batch_raters(index)) >= self.raters_per_task:
                    continue
                self._append({"type": "assign", "rater_id": rater_id, "batch": index})
                self._assigned.setdefault(rater_id, []).append(index)
                return self.batch_payload(index)
            return None

    def submit(self, judgment: Judgment) -> SubmitResult:
        with self._lock:
            task = self.by_id.get(judgment.task_id)
            if task is None:
                raise UnknownTaskError(f"unknown task {judgment.task_id!r}")
            if not judgment.rater_id:
                raise UnknownRaterError("rater id must be non-empty")
            batch_index = next(
                i for i, (_, ids) in enumerate(self.batches) if judgment.task_id in ids
            )
            if batch_index not in self._assigned.get(judgment.rater_id, []):
                raise NotAssignedError(
                    f"task {judgment.task_id!r} is not assigned to rater {judgment.rater_id!r}"
                )
            key = (judgment.task_id, judgment.rater_id)
            if key in self._judgments:
                raise DuplicateJudgmentError(
                    f"rater {judgment.rater_id!r} already judged task {judgment.task_id!r}"
                )
            self._append({
                "type": "judgment",
                "task_id": judgment.task_id,
                "rater_id": judgment.rater_id,
                "answer": judgment.answer,
                "elapsed_seconds": judgment.elapsed_seconds,
            })
            self._judgments[key] = judgment
            if task.is_golden:
                return SubmitResult(
                    task_id=task.task_id,
                    rater_id=judgment.rater_id,
                    golden_feedback=True,
                    correct=judgment.answer == task.golden_answer,
                    expected_answer=task.golden_answer,
                )
            return SubmitResult(task_id=task.task_id, rater_id=judgment.rater_id,
                                golden_feedback=False)

    def rater_summary(self, rater_id: str) -> RaterStats:
        with self._lock:
            mine = [j for j in self._judgments.values() if j.rater_id == rater_id]
        if not mine:
            raise UnknownRaterError(f"no judgments recorded for rater {rater_id!r}")
        return rater_report(mine, self.tasks)[0]


def load_tasks(path: str | Path) -> list[AnnotationTask]:
    objs = json.loads(Path(path).read_text(encoding="utf-8"))
    return [AnnotationTask.from_dict(obj) for obj in objs]


def save_tasks(tasks: Sequence[AnnotationTask], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([t.to_dict() for t in tasks], indent=2, sort_keys=True),
        encoding="utf-8",
    )


def read_judgment_log(path: str | Path) -> list[Judgment]:
    """Judgments from a store's write-ahead log, torn tail tolerated."""
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                break
            if obj.get("type") == "judgment":
                out.append(Judgment(obj["task_id"], obj["rater_id"], bool(obj["answer"]),
                                    float(obj.get("elapsed_seconds", 0.0))))
    return out

"""Human-in-the-loop annotation: batching, voting, rater stats, HTTP API."""

from .core import (
    DEFAULT_GOLDEN_RATE,
    DEFAULT_RATERS_PER_TASK,
    AnnotationTask,
    CohortComparison,
    Judgment,
    RaterStats,
    VoteOutcome,
    aggregate_votes,
    compare_cohorts,
    export_positives,
    make_batches,
    partition_tasks,
    rater_report,
    relative_error_reduction,
    speed_ratio,
)
from .store import (
    AnnotationStore,
    DuplicateJudgmentError,
    NotAssignedError,
    SubmitResult,
    UnknownRaterError,
    UnknownTaskError,
    load_tasks,
    read_judgment_log,
    save_tasks,
)

__all__ = [
    "AnnotationStore",
    "AnnotationTask",
    "CohortComparison",
    "DEFAULT_GOLDEN_RATE",
    "DEFAULT_RATERS_PER_TASK",
    "DuplicateJudgmentError",
    "Judgment",
    "NotAssignedError",
    "RaterStats",
    "SubmitResult",
    "UnknownRaterError",
    "UnknownTaskError",
    "VoteOutcome",
    "aggregate_votes",
    "compare_cohorts",
    "export_positives",
    "load_tasks",
    "make_batches",
    "partition_tasks",
    "rater_report",
    "read_judgment_log",
    "relative_error_reduction",
    "save_tasks",
    "speed_ratio",
]

import itertools
import random

import pytest

from webcurate.annotate import (
    AnnotationTask,
    Judgment,
    aggregate_votes,
    compare_cohorts,
    export_positives,
    make_batches,
    partition_tasks,
    rater_report,
    relative_error_reduction,
    speed_ratio,
)
from webcurate.errors import ValidationError
from webcurate.sampler import SelectionResult


def votes(task_id, answers):
    return [
        Judgment(task_id=task_id, rater_id=f"r{k}", answer=a, elapsed_seconds=1.0 + k)
        for k, a in enumerate(answers)
    ]


def simple_task(task_id, class_id="c0", image_id=None, is_golden=False, golden_answer=None):
    return AnnotationTask(
        task_id=task_id,
        class_id=class_id,
        image_id=image_id or f"img-{task_id}",
        is_golden=is_golden,
        golden_answer=golden_answer,
        negatives=(("c1", "neg-img"),),
    )


GOLDENS = {
    "c0": [(f"c0-gold{k}", k % 2 == 0) for k in range(12)],
    "c1": [(f"c1-gold{k}", True) for k in range(6)],
    "c2": [(f"c2-gold{k}", True) for k in range(6)],
}
CONFUSION = {"c0": ["c1", "c2"], "c1": ["c0"], "c2": ["c0", "c1"]}


# ---------------------------------------------------------------------------
# voting


@pytest.mark.parametrize("answers", list(itertools.product([True, False], repeat=3)))
def test_all_eight_vote_patterns(answers):
    outcomes = aggregate_votes(votes("t", answers))
    assert len(outcomes) == 1
    outcome = outcomes[0]
    yes = sum(answers)
    assert outcome.accepted == (yes >= 2)
    assert outcome.votes_for == yes
    assert outcome.votes_against == 3 - yes


def test_two_judgments_stay_pending():
    outcomes = aggregate_votes(votes("t", [True, True]))
    assert outcomes == []


def test_four_judgments_is_an_assignment_bug():
    with pytest.raises(ValidationError, match="judgments"):
        aggregate_votes(votes("t", [True, True, False, False]))


def test_same_rater_twice_rejected():
    bad = [Judgment("t", "r0", True), Judgment("t", "r0", False), Judgment("t", "r1", True)]
    with pytest.raises(ValidationError, match="repeated"):
        aggregate_votes(bad)


def test_vote_symmetry_under_permutation():
    for answers in itertools.product([True, False], repeat=3):
        base = aggregate_votes(votes("t", answers))[0]
        for perm in itertools.permutations(answers):
            assert aggregate_votes(votes("t", perm))[0].accepted == base.accepted


def test_five_rater_majority():
    outcomes = aggregate_votes(votes("t", [True, True, True, False, False]),
                               raters_per_task=5)
    assert outcomes[0].accepted
    outcomes = aggregate_votes(votes("t", [True, True, False, False, False]),
                               raters_per_task=5)
    assert not outcomes[0].accepted


# ---------------------------------------------------------------------------
# batching


def selection(counts):
    return SelectionResult(per_class={c: [f"{c}-img{k}" for k in range(n)]
                                      for c, n in counts.items()})


def test_zero_golden_rate_means_no_goldens():
    tasks = make_batches(selection({"c0": 10}), GOLDENS, 0.0, CONFUSION, seed=1)
    assert len(tasks) == 10
    assert not any(t.is_golden for t in tasks)


def test_golden_count_and_class_contiguity():
    tasks = make_batches(selection({"c0": 90, "c1": 40}), GOLDENS, 0.1, CONFUSION, seed=2)
    c0 = [t for t in tasks if t.class_id == "c0"]
    c1 = [t for t in tasks if t.class_id == "c1"]
    assert sum(t.is_golden for t in c0) == 9
    assert sum(t.is_golden for t in c1) == 4
    # contiguous class blocks: class changes at most once across the list
    changes = sum(1 for a, b in zip(tasks, tasks[1:]) if a.class_id != b.class_id)
    assert changes == 1
    # every real image still present, in order
    real = [t.image_id for t in c0 if not t.is_golden]
    assert real == [f"c0-img{k}" for k in range(90)]


def test_same_seed_reproduces_batches():
    a = make_batches(selection({"c0": 30, "c2": 12}), GOLDENS, 0.15, CONFUSION, seed=42)
    b = make_batches(selection({"c0": 30, "c2": 12}), GOLDENS, 0.15, CONFUSION, seed=42)
    c = make_batches(selection({"c0": 30, "c2": 12}), GOLDENS, 0.15, CONFUSION, seed=43)
    assert a == b
    assert a != c


def test_missing_goldens_fails_when_rate_positive():
    with pytest.raises(ValidationError, match="golden"):
        make_batches(selection({"c9": 5}), {}, 0.1, {"c9": ["c1"]}, seed=1)


def test_tasks_carry_positives_and_negatives():
    tasks = make_batches(selection({"c0": 5}), GOLDENS, 0.2, CONFUSION, seed=3)
    for task in tasks:
        assert task.positives  # known-true images of c0
        assert set(task.positives) <= {img for img, ans in GOLDENS["c0"] if ans}
        negative_classes = {cls for cls, _ in task.negatives}
        assert 1 <= len(negative_classes) <= 2
        assert negative_classes <= {"c1", "c2"}


def test_no_negatives_available_is_an_error():
    with pytest.raises(ValidationError, match="negatives"):
        make_batches(selection({"c0": 3}), {"c0": [("g", True)]}, 0.0, {}, seed=1)


def test_golden_rate_bounds():
    with pytest.raises(ValidationError, match="golden_rate"):
        make_batches(selection({"c0": 3}), GOLDENS, 1.5, CONFUSION, seed=1)


# ---------------------------------------------------------------------------
# golden isolation and conservation


def test_golden_isolation_and_partition():
    rng = random.Random(4)
    tasks = make_batches(selection({"c0": 40, "c1": 25}), GOLDENS, 0.15, CONFUSION, seed=5)
    judgments = []
    undecided = set()
    for t in tasks:
        if rng.random() < 0.2:  # leave some tasks pending
            undecided.add(t.task_id)
            continue
        judgments += votes(t.task_id, [rng.random() < 0.6 for _ in range(3)])
    outcomes = aggregate_votes(judgments)

    positives = export_positives(outcomes, tasks)
    golden_images = {t.image_id for t in tasks if t.is_golden}
    exported = {img for images in positives.values() for img in images}
    assert exported & golden_images == set()

    accepted, rejected, pending = partition_tasks(tasks, outcomes)
    non_golden = {t.task_id for t in tasks if not t.is_golden}
    assert set(accepted) | set(rejected) | set(pending) == non_golden
    assert len(accepted) + len(rejected) + len(pending) == len(non_golden)
    assert set(pending) == undecided & non_golden


def test_export_positives_requires_known_tasks():
    outcomes = aggregate_votes(votes("ghost", [True, True, True]))
    with pytest.raises(ValidationError, match="unknown"):
        export_positives(outcomes, [])


# ---------------------------------------------------------------------------
# rater quality


def test_rater_all_goldens_correct():
    tasks = [
        simple_task("g1", is_golden=True, golden_answer=True),
        simple_task("g2", is_golden=True, golden_answer=False),
    ]
    judgments = [
        Judgment("g1", "r0", True, 2.0),
        Judgment("g2", "r0", False, 4.0),
    ]
    stats = rater_report(judgments, tasks)
    assert stats[0].error_rate == 0.0
    assert stats[0].golden_seen == 2
    assert stats[0].mean_seconds_per_image == pytest.approx(3.0)


def test_rater_without_goldens_has_no_error_rate():
    tasks = [simple_task("t1")]
    stats = rater_report([Judgment("t1", "r0", True, 1.0)], tasks)
    assert stats[0].error_rate is None
    assert stats[0].golden_seen == 0


def test_rater_report_rejects_unknown_tasks():
    with pytest.raises(ValidationError, match="unknown"):
        rater_report([Judgment("ghost", "r0", True)], [])


def test_relative_error_reduction_matches_reported_value():
    reduction = relative_error_reduction(0.285, 0.238)
    assert reduction * 100 == pytest.approx(16.5, abs=0.1)


def test_speed_ratio_matches_reported_value():
    ratio = speed_ratio(4.1, 1.68)
    assert ratio == pytest.approx(2.44, abs=0.005)
    assert round(ratio, 1) == 2.4


def test_cohort_comparison_pools_raters():
    def cohort(error_rate, seconds, n_goldens=1000):
        correct = round((1 - error_rate) * n_goldens)
        tasks = []
        judgments = []
        for k in range(n_goldens):
            t = simple_task(f"g{k}-{seconds}", is_golden=True, golden_answer=True)
            tasks.append(t)
            judgments.append(Judgment(t.task_id, "r0", k < correct, seconds))
        return rater_report(judgments, tasks)

    base = cohort(0.285, 4.1)
    new = cohort(0.238, 1.68)
    cmp = compare_cohorts(base, new)
    assert cmp.relative_error_reduction * 100 == pytest.approx(16.5, abs=0.2)
    assert cmp.speed_ratio == pytest.approx(2.44, abs=0.01)


def test_golden_task_requires_answer():
    with pytest.raises(ValidationError, match="golden_answer"):
        AnnotationTask(task_id="t", class_id="c", image_id="i", is_golden=True)


def test_negatives_span_at_most_two_classes():
    with pytest.raises(ValidationError, match="classes"):
        AnnotationTask(
            task_id="t", class_id="c", image_id="i",
            negatives=(("a", "1"), ("b", "2"), ("c", "3")),
        )

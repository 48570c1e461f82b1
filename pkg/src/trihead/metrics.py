"""Scoring: per-task micro precision/recall/F1, their average, Instance F1.

Each comment carries exactly one label per task, so micro-averaging has a
useful property: summed false positives equal summed false negatives,
which forces precision == recall == F1 per task. micro_prf computes the
counts honestly and asserts the identity rather than shortcutting to
accuracy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from .errors import DataError

AGGRESSION_LABELS = ("NAG", "CAG", "OAG")
GENDER_LABELS = ("NGEN", "GEN")
COMMUNAL_LABELS = ("NCOM", "COM")

TASKS = ("aggression", "gender", "communal")
TASK_LABELS = {
    "aggression": AGGRESSION_LABELS,
    "gender": GENDER_LABELS,
    "communal": COMMUNAL_LABELS,
}


@dataclass(frozen=True)
class TriLabel:
    """One comment's three gold or predicted labels."""

    aggression: str
    gender: str
    communal: str

    def __post_init__(self):
        for task in TASKS:
            value = getattr(self, task)
            if value not in TASK_LABELS[task]:
                raise DataError(
                    f"invalid {task} label {value!r}; expected one of {TASK_LABELS[task]}"
                )

    def get(self, task: str) -> str:
        return getattr(self, task)


@dataclass(frozen=True)
class TaskScore:
    task: str
    precision: float
    recall: float
    f1: float
    support: dict


@dataclass(frozen=True)
class MetricsReport:
    tasks: tuple
    overall_micro_f1: float
    instance_f1: float
    n_instances: int

    def task_score(self, task: str) -> TaskScore:
        for ts in self.tasks:
            if ts.task == task:
                return ts
        raise KeyError(task)

    def to_json(self) -> str:
        payload = {
            "tasks": [
                {
                    "task": ts.task,
                    "precision": ts.precision,
                    "recall": ts.recall,
                    "f1": ts.f1,
                    "support": ts.support,
                }
                for ts in self.tasks
            ],
            "overall_micro_f1": self.overall_micro_f1,
            "instance_f1": self.instance_f1,
            "n_instances": self.n_instances,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def to_table(self) -> str:
        lines = [f"{'task':<12} {'P':>6} {'R':>6} {'F1':>6}"]
        for ts in self.tasks:
            lines.append(
                f"{ts.task:<12} {ts.precision:>6.3f} {ts.recall:>6.3f} {ts.f1:>6.3f}"
            )
        lines.append(f"{'overall':<12} {'':>6} {'':>6} {self.overall_micro_f1:>6.3f}")
        lines.append(f"{'instance':<12} {'':>6} {'':>6} {self.instance_f1:>6.3f}")
        return "\n".join(lines)


def _validate_pair(gold: Sequence, pred: Sequence):
    if len(gold) != len(pred):
        raise DataError(f"gold has {len(gold)} rows but pred has {len(pred)}")
    if len(gold) == 0:
        raise DataError("cannot score an empty label sequence")


def micro_prf(gold: Sequence[str], pred: Sequence[str], task: str) -> tuple:
    """Micro-averaged (precision, recall, F1) for one task's label strings."""
    if task not in TASK_LABELS:
        raise DataError(f"unknown task {task!r}; expected one of {TASKS}")
    _validate_pair(gold, pred)
    labels = TASK_LABELS[task]
    for i, (g, p) in enumerate(zip(gold, pred)):
        if g not in labels:
            raise DataError(f"row {i}: invalid gold {task} label {g!r}")
        if p not in labels:
            raise DataError(f"row {i}: invalid predicted {task} label {p!r}")

    tp = fp = fn = 0
    for c in labels:
        tp += sum(1 for g, p in zip(gold, pred) if g == c and p == c)
        fp += sum(1 for g, p in zip(gold, pred) if p == c and g != c)
        fn += sum(1 for g, p in zip(gold, pred) if g == c and p != c)
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    # single label per row makes fp == fn; keep F1 bitwise equal to both
    assert fp == fn, "single-label micro counts must satisfy FP == FN"
    f1 = precision if precision == recall else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def instance_f1(gold: Sequence[TriLabel], pred: Sequence[TriLabel]) -> float:
    """Fraction of instances with all three labels correct (exact match)."""
    _validate_pair(gold, pred)
    correct = sum(1 for g, p in zip(gold, pred) if g == p)
    return correct / len(gold)


def overall_micro_f1(report: MetricsReport) -> float:
    """Plain average of the three per-task micro F1 scores."""
    f1s = [ts.f1 for ts in report.tasks]
    if len(f1s) != 3:
        raise DataError(f"report has {len(f1s)} tasks, expected 3")
    return sum(f1s) / 3.0


def score_triples(gold: Sequence[TriLabel], pred: Sequence[TriLabel]) -> MetricsReport:
    """Full report over parallel gold/predicted TriLabel sequences."""
    _validate_pair(gold, pred)
    scores = []
    for task in TASKS:
        g = [t.get(task) for t in gold]
        p = [t.get(task) for t in pred]
        precision, recall, f1 = micro_prf(g, p, task)
        support = {c: sum(1 for v in g if v == c) for c in TASK_LABELS[task]}
        scores.append(TaskScore(task, precision, recall, f1, support))
    report = MetricsReport(
        tasks=tuple(scores),
        overall_micro_f1=sum(ts.f1 for ts in scores) / 3.0,
        instance_f1=instance_f1(gold, pred),
        n_instances=len(gold),
    )
    return report

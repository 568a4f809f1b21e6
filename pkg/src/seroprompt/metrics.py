"""Confusion counts, precision/recall/F1/accuracy and report tables."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _validate(y_true: Sequence[int], y_pred: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError(f"y_true and y_pred must be equal-length vectors, got {t.shape} and {p.shape}")
    if t.size == 0:
        raise ValueError("cannot score empty predictions")
    if not (np.isin(t, (0, 1)).all() and np.isin(p, (0, 1)).all()):
        raise ValueError("labels must be 0 or 1")
    return t.astype(np.int64), p.astype(np.int64)


def confusion(y_true: Sequence[int], y_pred: Sequence[int], positive: int = 1) -> ConfusionCounts:
    t, p = _validate(y_true, y_pred)
    if positive not in (0, 1):
        raise ValueError("positive class must be 0 or 1")
    tpos, ppos = t == positive, p == positive
    return ConfusionCounts(
        tp=int(np.sum(tpos & ppos)),
        fp=int(np.sum(~tpos & ppos)),
        tn=int(np.sum(~tpos & ~ppos)),
        fn=int(np.sum(tpos & ~ppos)),
    )


@dataclass(frozen=True)
class MetricValues:
    precision: float
    recall: float
    f1: float
    accuracy: float
    degenerate: tuple[str, ...] = ()


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean; 0 when both inputs are 0."""
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def compute_metrics(counts: ConfusionCounts) -> MetricValues:
    """Precision, recall, F1 and accuracy. A zero denominator yields 0 and
    the metric's name in ``degenerate``."""
    if counts.total <= 0:
        raise ValueError("confusion counts are empty")
    flags = []
    if counts.tp + counts.fp == 0:
        precision = 0.0
        flags.append("precision")
    else:
        precision = counts.tp / (counts.tp + counts.fp)
    if counts.tp + counts.fn == 0:
        recall = 0.0
        flags.append("recall")
    else:
        recall = counts.tp / (counts.tp + counts.fn)
    if precision + recall == 0:
        flags.append("f1")
    return MetricValues(
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        accuracy=(counts.tp + counts.tn) / counts.total,
        degenerate=tuple(flags),
    )


@dataclass(frozen=True)
class ClassRow:
    precision: float
    recall: float
    f1: float
    support: int
    degenerate: tuple[str, ...] = ()


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    rows: Mapping[int, ClassRow]
    confusion_matrix: tuple[tuple[int, int], tuple[int, int]] = field(default=((0, 0), (0, 0)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "classes": {
                str(c): {
                    "precision": r.precision,
                    "recall": r.recall,
                    "f1": r.f1,
                    "support": r.support,
                    "degenerate": list(r.degenerate),
                }
                for c, r in sorted(self.rows.items())
            },
            "confusion_matrix": [list(r) for r in self.confusion_matrix],
        }


def full_report(y_true: Sequence[int], y_pred: Sequence[int]) -> MetricsReport:
    """Accuracy once, then precision/recall/F1 with each class taken as positive."""
    t, p = _validate(y_true, y_pred)
    rows = {}
    accuracy = None
    for cls in (0, 1):
        counts = confusion(t, p, positive=cls)
        m = compute_metrics(counts)
        accuracy = m.accuracy
        rows[cls] = ClassRow(m.precision, m.recall, m.f1, support=counts.tp + counts.fn, degenerate=m.degenerate)
    # rows: true class, columns: predicted class
    matrix = tuple(tuple(int(np.sum((t == i) & (p == j))) for j in (0, 1)) for i in (0, 1))
    return MetricsReport(accuracy=accuracy, rows=rows, confusion_matrix=matrix)


def format_table(title: str, reports: Mapping[str, MetricsReport], digits: int = 4) -> str:
    """Plain-text table: one accuracy row per model, then one row per class."""
    header = f"{'Model':<28}{'Accuracy':>10}{'Precision':>11}{'Recall':>9}{'F1-score':>10}"
    lines = [title, "-" * len(header), header, "-" * len(header)]
    fmt = f"{{:.{digits}f}}"
    for name, rep in reports.items():
        lines.append(f"{name:<28}{fmt.format(rep.accuracy):>10}")
        for cls, row in sorted(rep.rows.items()):
            flag = " *" if row.degenerate else ""
            lines.append(
                f"{'  ' + str(cls):<28}{'':>10}{fmt.format(row.precision):>11}"
                f"{fmt.format(row.recall):>9}{fmt.format(row.f1):>10}{flag}"
            )
    lines.append("-" * len(header))
    if any(r.degenerate for rep in reports.values() for r in rep.rows.values()):
        lines.append("* zero denominator in at least one metric (reported as 0)")
    return "\n".join(lines) + "\n"


def write_confusion_csv(path: str | Path, reports: Mapping[str, MetricsReport], comment: str | None = None) -> None:
    """Long-format confusion matrices: model,true,predicted,count."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "true", "predicted", "count"])
        for name, rep in reports.items():
            for i in (0, 1):
                for j in (0, 1):
                    w.writerow([name, i, j, rep.confusion_matrix[i][j]])

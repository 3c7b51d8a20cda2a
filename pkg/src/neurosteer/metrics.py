"""Confusion matrix and per-class precision/recall/F1 plus overall accuracy.

Rows of the matrix are actual classes, columns predicted, in (straight,
left, right) order. Zero denominators yield a metric of 0 together with a
flag rather than NaN so CSV reports stay numeric. Report output rounds
half-up to 3 decimals; raw doubles are kept internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BadLabel, EmptyMatrix, LengthMismatch
from .recording import LABELS

N_CLASSES = 3


@dataclass(frozen=True)
class ConfusionMatrix:
    """3x3 integer counts; counts[a][p] = samples of actual class a
    predicted as class p."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (N_CLASSES, N_CLASSES):
            raise EmptyMatrix(f"confusion matrix must be 3x3, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("confusion counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassMetrics:
    precision: tuple[float, float, float]
    recall: tuple[float, float, float]
    f1: tuple[float, float, float]
    accuracy: float
    flags: tuple[str, ...] = ()


def confusion(actual: Sequence[int], predicted: Sequence[int]) -> ConfusionMatrix:
    actual = np.asarray(actual, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if actual.shape != predicted.shape or actual.ndim != 1 or actual.size == 0:
        raise LengthMismatch(
            f"need equal non-empty label vectors, got {actual.shape} and {predicted.shape}"
        )
    for name, arr in (("actual", actual), ("predicted", predicted)):
        bad = (arr < 0) | (arr >= N_CLASSES)
        if bad.any():
            raise BadLabel(f"{name} labels contain {arr[bad][0]} outside {{0,1,2}}")
    counts = np.bincount(actual * N_CLASSES + predicted, minlength=N_CLASSES ** 2)
    return ConfusionMatrix(counts.reshape(N_CLASSES, N_CLASSES))


def class_metrics(cm: ConfusionMatrix) -> ClassMetrics:
    """precision_c = counts[c][c]/colsum_c, recall_c = counts[c][c]/rowsum_c,
    f1_c harmonic mean, accuracy = trace/total."""
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix has no observations")
    counts = cm.counts.astype(np.float64)
    colsum = counts.sum(axis=0)
    rowsum = counts.sum(axis=1)
    precision, recall, f1 = [], [], []
    flags: list[str] = []
    for c in range(N_CLASSES):
        tp = counts[c, c]
        if colsum[c] == 0:
            precision.append(0.0)
            flags.append(f"precision[{LABELS[c]}]: zero denominator")
        else:
            precision.append(tp / colsum[c])
        if rowsum[c] == 0:
            recall.append(0.0)
            flags.append(f"recall[{LABELS[c]}]: zero denominator")
        else:
            recall.append(tp / rowsum[c])
        if precision[c] + recall[c] == 0.0:
            f1.append(0.0)
            flags.append(f"f1[{LABELS[c]}]: zero denominator")
        else:
            f1.append(2 * precision[c] * recall[c] / (precision[c] + recall[c]))
    accuracy = float(np.trace(cm.counts)) / cm.total
    return ClassMetrics(tuple(precision), tuple(recall), tuple(f1), accuracy, tuple(flags))


def round3(x: float) -> float:
    """Half-up rounding to 3 decimals, matching the report presentation."""
    return float(Decimal(repr(x)).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def format_confusion(cm: ConfusionMatrix) -> str:
    """Matrix as text, actual classes in rows, predicted in columns."""
    width = max(len(name) for name in LABELS)
    head = " " * (width + 2) + "  ".join(f"{n:>8s}" for n in LABELS)
    rows = [head]
    for a in range(N_CLASSES):
        cells = "  ".join(f"{int(cm.counts[a, p]):8d}" for p in range(N_CLASSES))
        rows.append(f"{LABELS[a]:>{width}s}  {cells}")
    return "\n".join(rows)


def write_confusion_csv(cm: ConfusionMatrix, path: str | Path) -> None:
    lines = ["actual,straight,left,right"]
    for a in range(N_CLASSES):
        lines.append(LABELS[a] + "," + ",".join(str(int(v)) for v in cm.counts[a]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def write_metrics_csv(metrics: ClassMetrics, path: str | Path) -> None:
    lines = ["class,precision,recall,f1"]
    for c in range(N_CLASSES):
        lines.append(
            f"{LABELS[c]},{round3(metrics.precision[c]):.3f},"
            f"{round3(metrics.recall[c]):.3f},{round3(metrics.f1[c]):.3f}"
        )
    lines.append(f"accuracy,{round3(metrics.accuracy):.3f},,")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")

"""Confusion matrix, per-class precision/recall/F1, macro averages, reports."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InputError

# Zero-denominator metrics report as 0.0 plus one of these flags.
FLAG_PRECISION_UNDEFINED = "precision_undefined"
FLAG_RECALL_UNDEFINED = "recall_undefined"
FLAG_F1_UNDEFINED = "f1_undefined"


@dataclass
class ConfusionMatrix:
    """counts[actual][predicted] over a fixed label order."""

    labels: tuple[str, ...]
    counts: np.ndarray = None

    def __post_init__(self):
        k = len(self.labels)
        if k < 2:
            raise DimensionError(f"confusion matrix needs >= 2 classes, got {k}")
        if self.counts is None:
            self.counts = np.zeros((k, k), dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            if self.counts.shape != (k, k):
                raise DimensionError(
                    f"counts shape {self.counts.shape} does not match {k} labels")

    def accumulate(self, actual: int, predicted: int) -> None:
        k = len(self.labels)
        if not (0 <= actual < k and 0 <= predicted < k):
            raise InputError(
                f"class index out of range: actual={actual} predicted={predicted} (k={k})")
        self.counts[actual, predicted] += 1

    @classmethod
    def from_predictions(cls, actuals, predictions,
                         labels: tuple[str, ...]) -> "ConfusionMatrix":
        cm = cls(labels=tuple(labels))
        actuals = list(actuals)
        predictions = list(predictions)
        if len(actuals) != len(predictions):
            raise InputError(f"{len(actuals)} actuals vs {len(predictions)} predictions")
        for a, p in zip(actuals, predictions):
            cm.accumulate(int(a), int(p))
        return cm


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    precision: float
    recall: float
    f1: float
    support: int
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class MetricsReport:
    per_class: tuple[ClassMetrics, ...]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    total_support: int
    accuracy: float


def f1_score(precision: float, recall: float) -> tuple[float, tuple[str, ...]]:
    if precision + recall == 0.0:
        return 0.0, (FLAG_F1_UNDEFINED,)
    return 2.0 * precision * recall / (precision + recall), ()


def macro_average(values) -> float:
    """Unweighted mean of per-class metric values."""
    values = list(values)
    return sum(values) / len(values)


def compute_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Per-class precision/recall/F1 with undefined cases flagged as 0.0."""
    counts = cm.counts
    per_class = []
    for i, label in enumerate(cm.labels):
        tp = int(counts[i, i])
        support = int(counts[i, :].sum())
        predicted = int(counts[:, i].sum())
        flags: list[str] = []
        if predicted == 0:
            precision = 0.0
            flags.append(FLAG_PRECISION_UNDEFINED)
        else:
            precision = tp / predicted
        if support == 0:
            recall = 0.0
            flags.append(FLAG_RECALL_UNDEFINED)
        else:
            recall = tp / support
        f1, f1_flags = f1_score(precision, recall)
        flags.extend(f1_flags)
        per_class.append(ClassMetrics(label=label, precision=precision,
                                      recall=recall, f1=f1, support=support,
                                      flags=tuple(flags)))
    total = int(counts.sum())
    accuracy = float(np.trace(counts)) / total if total else 0.0
    return MetricsReport(
        per_class=tuple(per_class),
        macro_precision=macro_average(m.precision for m in per_class),
        macro_recall=macro_average(m.recall for m in per_class),
        macro_f1=macro_average(m.f1 for m in per_class),
        total_support=total,
        accuracy=accuracy,
    )


def display_value(v: float) -> str:
    """2-decimal display used in rendered tables.

    Values truncate toward zero on the third decimal (0.8866 -> 0.88); the
    1e-9 guard keeps exact hundredths from slipping a cent under float error.
    """
    cents = int(np.floor(v * 100.0 + 1e-9))
    return f"{cents // 100}.{cents % 100:02d}"


def render_report(report: MetricsReport) -> str:
    """Plain-text metric table: one row per class plus the macro-average row."""
    rows = [("Class", "Precision", "Recall", "F1 Score", "Support")]
    for m in report.per_class:
        rows.append((m.label, display_value(m.precision), display_value(m.recall),
                     display_value(m.f1), str(m.support)))
    rows.append(("Average", display_value(report.macro_precision),
                 display_value(report.macro_recall), display_value(report.macro_f1),
                 str(report.total_support)))
    widths = [max(len(r[c]) for r in rows) + 2 for c in range(5)]
    lines = ["".join(f"{cell:<{w}}" for cell, w in zip(row, widths)).rstrip()
             for row in rows]
    notes = [f"note: {flag.replace('_', ' ')} for class {m.label}; reported as 0.00"
             for m in report.per_class for flag in m.flags]
    return "\n".join(lines + notes)


def metrics_csv(report: MetricsReport) -> str:
    """CSV body for metrics files; full-precision floats, LF line endings."""
    lines = ["class,precision,recall,f1,support,flags"]
    for m in report.per_class:
        lines.append(f"{m.label},{m.precision!r},{m.recall!r},{m.f1!r},"
                     f"{m.support},{';'.join(m.flags)}")
    lines.append(f"macro,{report.macro_precision!r},{report.macro_recall!r},"
                 f"{report.macro_f1!r},{report.total_support},")
    return "\n".join(lines) + "\n"


def matrix_dump(cm: ConfusionMatrix) -> str:
    """k lines of k space-separated integers, actual rows by predicted columns."""
    return "\n".join(" ".join(str(int(v)) for v in row) for row in cm.counts) + "\n"


def render_confusion(cm: ConfusionMatrix) -> str:
    """Actual-by-predicted count table for confusion.txt."""
    header = ["actual\\predicted"] + list(cm.labels)
    rows = [header]
    for i, label in enumerate(cm.labels):
        rows.append([label] + [str(int(v)) for v in cm.counts[i]])
    widths = [max(len(r[c]) for r in rows) + 2 for c in range(len(header))]
    return "\n".join(
        "".join(f"{cell:<{w}}" for cell, w in zip(row, widths)).rstrip()
        for row in rows)

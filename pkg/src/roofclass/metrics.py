"""Confusion-matrix construction and macro-averaged classification metrics.

Per-class precision, recall and F1 follow the one-vs-rest definitions
(TP / (TP + FP) etc.); macro values are unweighted means over classes.
Overall accuracy is reported as trace / total, the standard multiclass
convention; per-class one-vs-rest accuracies are kept alongside for
transparency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    """K x K count matrix; rows index the true class, columns the prediction."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError(f"confusion matrix must be square, got shape {counts.shape}")
        if (counts < 0).any():
            raise ValueError("confusion matrix counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def true_positives(self) -> np.ndarray:
        return np.diag(self.counts).copy()

    def false_positives(self) -> np.ndarray:
        return self.counts.sum(axis=0) - np.diag(self.counts)

    def false_negatives(self) -> np.ndarray:
        return self.counts.sum(axis=1) - np.diag(self.counts)

    def true_negatives(self) -> np.ndarray:
        tp = self.true_positives()
        return self.total - tp - self.false_positives() - self.false_negatives()


@dataclass
class MetricsReport:
    """Per-class and macro-averaged metrics for one evaluation run."""

    class_names: list[str]
    precision: list[float]
    recall: list[float]
    f1: list[float]
    per_class_accuracy: list[float]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    support: list[int]
    zero_division_classes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "class_names": list(self.class_names),
            "per_class": {
                name: {
                    "precision": self.precision[i],
                    "recall": self.recall[i],
                    "f1": self.f1[i],
                    "accuracy": self.per_class_accuracy[i],
                    "support": self.support[i],
                }
                for i, name in enumerate(self.class_names)
            },
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "zero_division_classes": list(self.zero_division_classes),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        names = list(d["class_names"])
        per = d["per_class"]
        return cls(
            class_names=names,
            precision=[per[n]["precision"] for n in names],
            recall=[per[n]["recall"] for n in names],
            f1=[per[n]["f1"] for n in names],
            per_class_accuracy=[per[n]["accuracy"] for n in names],
            macro_precision=d["macro_precision"],
            macro_recall=d["macro_recall"],
            macro_f1=d["macro_f1"],
            accuracy=d["accuracy"],
            support=[per[n]["support"] for n in names],
            zero_division_classes=list(d.get("zero_division_classes", [])),
        )


def confusion_matrix(y_true, y_pred, num_classes: int) -> ConfusionMatrix:
    """Count (true, predicted) pairs into a K x K matrix.

    Raises ValueError on length mismatch or out-of-range class indices.
    """
    y_true = np.asarray(y_true, dtype=np.int64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.int64).ravel()
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape[0]} true vs {y_pred.shape[0]} predicted")
    if num_classes < 1:
        raise ValueError("num_classes must be >= 1")
    if y_true.size:
        for name, arr in (("y_true", y_true), ("y_pred", y_pred)):
            if arr.min() < 0 or arr.max() >= num_classes:
                raise ValueError(f"{name} contains class indices outside [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


def macro_metrics(cm: ConfusionMatrix, class_names: list[str] | None = None) -> MetricsReport:
    """Compute per-class precision/recall/F1 and their unweighted macro means.

    Classes with a zero denominator (no predictions or no true samples)
    contribute 0 to the macro average and are listed in
    ``zero_division_classes``.
    """
    k = cm.num_classes
    names = list(class_names) if class_names is not None else [f"class_{i}" for i in range(k)]
    if len(names) != k:
        raise ValueError(f"expected {k} class names, got {len(names)}")

    tp = cm.true_positives().astype(np.float64)
    fp = cm.false_positives().astype(np.float64)
    fn = cm.false_negatives().astype(np.float64)
    tn = cm.true_negatives().astype(np.float64)
    total = float(cm.total)

    flagged: list[str] = []
    precision = np.zeros(k)
    recall = np.zeros(k)
    f1 = np.zeros(k)
    for i in range(k):
        flag = False
        if tp[i] + fp[i] > 0:
            precision[i] = tp[i] / (tp[i] + fp[i])
        else:
            flag = True
        if tp[i] + fn[i] > 0:
            recall[i] = tp[i] / (tp[i] + fn[i])
        else:
            flag = True
        if precision[i] + recall[i] > 0:
            f1[i] = 2.0 * precision[i] * recall[i] / (precision[i] + recall[i])
        else:
            flag = True
        if flag:
            flagged.append(names[i])

    per_class_acc = (tp + tn) / total if total > 0 else np.zeros(k)
    accuracy = float(tp.sum() / total) if total > 0 else 0.0

    return MetricsReport(
        class_names=names,
        precision=precision.tolist(),
        recall=recall.tolist(),
        f1=f1.tolist(),
        per_class_accuracy=per_class_acc.tolist(),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        accuracy=accuracy,
        support=cm.counts.sum(axis=1).astype(int).tolist(),
        zero_division_classes=flagged,
    )


def evaluate(y_true, y_pred, class_names: list[str]) -> MetricsReport:
    """Shortcut: confusion matrix plus macro metrics in one call."""
    cm = confusion_matrix(y_true, y_pred, num_classes=len(class_names))
    return macro_metrics(cm, class_names)


def format_report_table(rows: list[tuple[str, MetricsReport]], title: str = "") -> str:
    """Render reports as a plain-text table of percentages (two decimals).

    Layout mirrors the published comparison tables: one row per model or
    strategy, columns F1 / Precision / Recall / Accuracy, best F1 marked.
    """
    header = f"{'':24s} {'F1 score':>10s} {'Precision':>10s} {'Recall':>10s} {'Accuracy':>10s}"
    lines = []
    if title:
        lines.append(title)
    lines.append(header)
    lines.append("-" * len(header))
    best_f1 = max((r.macro_f1 for _, r in rows), default=0.0)
    for name, rep in rows:
        mark = "*" if rows and abs(rep.macro_f1 - best_f1) < 1e-12 else " "
        lines.append(
            f"{name:24s} {100 * rep.macro_f1:9.2f}{mark} {100 * rep.macro_precision:10.2f} "
            f"{100 * rep.macro_recall:10.2f} {100 * rep.accuracy:10.2f}"
        )
    if rows:
        lines.append("(* best F1)")
    return "\n".join(lines)

"""Classification metrics with an ordinal, rank-aware error.

Micro accuracy, macro precision/recall/F1 (per-class scores averaged,
empty denominators contributing 0), a K x K confusion matrix (rows =
true, columns = predicted), and an ordinal RMSE computed on class ranks
under a configurable class order. Instances whose true class is unknown
(-1) are excluded before anything is computed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MetricsReport", "evaluate"]

UNKNOWN_CLASS = -1


@dataclass
class MetricsReport:
    accuracy: float            # percent
    macro_precision: float
    macro_recall: float
    macro_f1: float
    ordinal_rmse: float
    confusion: np.ndarray      # (K, K), rows true, cols predicted
    class_order: tuple[int, ...]
    evaluated: int

    def to_kv(self) -> str:
        """Machine-readable key=value lines."""
        lines = [
            f"accuracy={self.accuracy!r}",
            f"recall={self.macro_recall!r}",
            f"precision={self.macro_precision!r}",
            f"f1={self.macro_f1!r}",
            f"rmse={self.ordinal_rmse!r}",
            f"evaluated={self.evaluated}",
            "class_order=" + ",".join(str(c) for c in self.class_order),
        ]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        header = "accuracy,recall,precision,f1,rmse"
        row = ",".join(repr(v) for v in (self.accuracy, self.macro_recall,
                                         self.macro_precision, self.macro_f1,
                                         self.ordinal_rmse))
        return f"{header}\n{row}\n"

    def confusion_csv(self) -> str:
        k = self.confusion.shape[0]
        lines = ["true\\pred," + ",".join(str(c + 1) for c in range(k))]
        for r in range(k):
            lines.append(",".join([str(r + 1)] + [str(int(v)) for v in self.confusion[r]]))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        return (
            f"evaluated instances : {self.evaluated}\n"
            f"accuracy [%]        : {self.accuracy:.3f}\n"
            f"macro recall        : {self.macro_recall:.3f}\n"
            f"macro precision     : {self.macro_precision:.3f}\n"
            f"macro F1            : {self.macro_f1:.3f}\n"
            f"ordinal RMSE        : {self.ordinal_rmse:.3f}\n"
        )


def _check_labels(labels: np.ndarray, num_classes: int, what: str) -> None:
    bad = (labels < 1) | (labels > num_classes)
    if np.any(bad):
        raise ValueError(f"{what} labels outside 1..{num_classes}: "
                         f"{sorted(set(labels[bad].tolist()))}")


def evaluate(predicted, true, num_classes: int,
             class_order: tuple[int, ...] | None = None) -> MetricsReport:
    """Score predictions against true labels (both 1..K; true may be -1).

    `class_order` lists all K classes in rank order for the ordinal RMSE;
    it defaults to 1..K. Raises if no instance has a known true label.
    """
    predicted = np.asarray(predicted, dtype=np.int64)
    true = np.asarray(true, dtype=np.int64)
    if predicted.shape != true.shape or predicted.ndim != 1:
        raise ValueError("predicted and true labels must be equal-length 1-D sequences")
    if class_order is None:
        class_order = tuple(range(1, num_classes + 1))
    if sorted(class_order) != list(range(1, num_classes + 1)):
        raise ValueError(f"class_order must be a permutation of 1..{num_classes}")

    keep = true != UNKNOWN_CLASS
    predicted, true = predicted[keep], true[keep]
    if predicted.size == 0:
        raise ValueError("no evaluable instances: every true label is unknown")
    _check_labels(predicted, num_classes, "predicted")
    _check_labels(true, num_classes, "true")

    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (true - 1, predicted - 1), 1)

    diag = np.diag(confusion).astype(np.float64)
    col = confusion.sum(axis=0).astype(np.float64)
    row = confusion.sum(axis=1).astype(np.float64)
    precision = np.divide(diag, col, out=np.zeros(num_classes), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros(num_classes), where=row > 0)
    pr = precision + recall
    f1 = np.divide(2.0 * precision * recall, pr, out=np.zeros(num_classes), where=pr > 0)

    rank = np.empty(num_classes + 1, dtype=np.float64)
    for pos, cls in enumerate(class_order):
        rank[cls] = pos
    errors = rank[predicted] - rank[true]

    return MetricsReport(
        accuracy=100.0 * float(diag.sum()) / predicted.size,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        ordinal_rmse=float(np.sqrt(np.mean(errors * errors))),
        confusion=confusion,
        class_order=tuple(class_order),
        evaluated=int(predicted.size),
    )

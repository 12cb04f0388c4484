"""Accuracy, macro F1 and weighted F1 from a confusion matrix (rows = actual, columns = predicted)."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..errors import UsageError


@dataclass
class EvalReport:
    confusion: np.ndarray
    accuracy: float  # percent
    mf1: float
    wf1: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    class_names: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    def names(self) -> list[str]:
        k = self.confusion.shape[0]
        if len(self.class_names) == k:
            return list(self.class_names)
        return [f"class{i}" for i in range(k)]

    def to_text(self) -> str:
        lines = [f"{k}: {v}" for k, v in self.extra.items()]
        lines += [
            f"samples: {int(self.confusion.sum())}",
            f"acc: {self.accuracy:.4f}",
            f"mf1: {self.mf1:.6f}",
            f"wf1: {self.wf1:.6f}",
            "",
            "class,support,precision,recall,f1",
        ]
        for name, s, p, r, f in zip(self.names(), self.support, self.precision, self.recall, self.f1):
            lines.append(f"{name},{int(s)},{p:.6f},{r:.6f},{f:.6f}")
        return "\n".join(lines) + "\n"

    def confusion_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = self.names()
        w.writerow(["actual\\predicted", *names])
        for name, row in zip(names, self.confusion):
            w.writerow([name, *[int(v) for v in row]])
        return buf.getvalue()


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def compute_metrics(confusion, class_names=()) -> EvalReport:
    """Per-class F1 = 2 TP / (2 TP + FP + FN); a class never predicted and never present scores 0."""
    cm = np.asarray(confusion)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.size == 0:
        raise UsageError(f"confusion matrix must be square and non-empty, got shape {cm.shape}")
    if (cm < 0).any() or not np.all(np.equal(np.mod(cm, 1), 0)):
        raise UsageError("confusion matrix entries must be non-negative integers")
    cm = cm.astype(np.int64)
    total = cm.sum()
    if total == 0:
        raise UsageError("confusion matrix has no samples")
    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)
    precision = _ratio(tp, predicted)
    recall = _ratio(tp, support)
    f1 = _ratio(2 * tp, support + predicted)
    return EvalReport(
        confusion=cm,
        accuracy=100.0 * tp.sum() / total,
        mf1=float(f1.mean()),
        wf1=float((f1 * support).sum() / total),
        precision=precision,
        recall=recall,
        f1=f1,
        support=support.astype(np.int64),
        class_names=tuple(class_names),
    )


def confusion_matrix(actual, predicted, n_classes: int) -> np.ndarray:
    a = np.asarray(actual, dtype=np.int64)
    p = np.asarray(predicted, dtype=np.int64)
    if a.shape != p.shape:
        raise UsageError(f"{a.shape[0]} labels but {p.shape[0]} predictions")
    if a.size and (min(a.min(), p.min()) < 0 or max(a.max(), p.max()) >= n_classes):
        raise UsageError(f"labels must lie in 0..{n_classes - 1}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (a, p), 1)
    return cm

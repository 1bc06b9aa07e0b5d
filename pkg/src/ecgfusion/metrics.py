from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LabelOutOfRange, LengthMismatch


@dataclass(frozen=True)
class Metrics:
    confusion: np.ndarray  # rows = true class, columns = predicted
    accuracy: float
    macro_precision: float
    macro_recall: float
    precision: np.ndarray
    recall: np.ndarray

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "confusion": self.confusion.tolist(),
        }


def confusion_matrix(truths, predictions, m: int) -> np.ndarray:
    t = np.asarray(truths, dtype=np.int64)
    p = np.asarray(predictions, dtype=np.int64)
    if t.shape != p.shape:
        raise LengthMismatch(f"{t.size} truths vs {p.size} predictions")
    for name, v in (("truth", t), ("prediction", p)):
        if v.size and (v.min() < 0 or v.max() >= m):
            raise LabelOutOfRange(f"{name} labels must be in [0, {m})")
    cm = np.zeros((m, m), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def compute_metrics(truths, predictions, m: int, average: str = "macro") -> Metrics:
    """Accuracy plus per-class and averaged precision/recall.

    Empty predicted columns give precision 0 and empty true rows recall 0. The
    averages run over the classes present in `truths`, unweighted ("macro") or
    weighted by true-class support ("weighted").
    """
    cm = confusion_matrix(truths, predictions, m)
    tp = np.diag(cm).astype(np.float64)
    col = cm.sum(0)
    row = cm.sum(1)
    precision = np.divide(tp, col, out=np.zeros(m), where=col > 0)
    recall = np.divide(tp, row, out=np.zeros(m), where=row > 0)
    total = cm.sum()
    present = row > 0
    if not present.any():
        return Metrics(cm, 0.0, 0.0, 0.0, precision, recall)
    if average == "macro":
        w = present / present.sum()
    elif average == "weighted":
        w = row / total
    else:
        raise ValueError(f"unknown average {average!r}")
    return Metrics(cm, float(tp.sum() / total), float(w @ precision), float(w @ recall), precision, recall)

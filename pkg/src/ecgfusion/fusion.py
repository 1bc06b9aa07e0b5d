"""Combining the two views' class probabilities.

`dst_fuse` is the Dempster-style rule: for each class y, the evidence of a view
is its probability for y and its conflict is the mass it puts elsewhere, and

    fused_y = E1_y * E2_y / (1 - C1_y * C2_y)

`score_fuse` (mean of probabilities) and the feature-level head are the
baselines it is compared against.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import BadSimplex, DimMismatch, LengthMismatch

SIMPLEX_TOL = 1e-6


class Method(str, enum.Enum):
    DST = "dst"
    SCORE = "score"
    FEATURE = "feature"


@dataclass(frozen=True)
class EvidencePair:
    evidence: float
    conflict: float


@dataclass(frozen=True)
class FusedDecision:
    """Fused scores and argmax class; 1-D for one beat, 2-D (beats x classes) for a batch."""

    scores: np.ndarray
    chosen: np.ndarray | int
    method: Method
    renormalized: bool = False


def check_simplex(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    if P.ndim not in (1, 2) or P.shape[-1] < 1:
        raise BadSimplex(f"expected probability vector(s), got shape {P.shape}")
    if np.any(~np.isfinite(P)) or np.any(P < -SIMPLEX_TOL):
        raise BadSimplex("probabilities must be finite and non-negative")
    if np.any(np.abs(P.sum(-1) - 1.0) > SIMPLEX_TOL):
        raise BadSimplex("probabilities must sum to 1")
    return np.clip(P, 0.0, 1.0)


def _same_shape(P1: np.ndarray, P2: np.ndarray) -> None:
    if P1.shape != P2.shape:
        raise LengthMismatch(f"view outputs have shapes {P1.shape} and {P2.shape}")


def argmax_first(scores: np.ndarray):
    """Argmax along the last axis; ties go to the lowest index."""
    c = np.argmax(scores, axis=-1)
    return int(c) if np.ndim(c) == 0 else c


def conflict(P: np.ndarray, reduction: str = "sum") -> np.ndarray:
    """Per-class conflict: the other classes' mass reduced to one number.

    "sum" gives 1 - p_y; "product" and "max" exist for sensitivity checks.
    """
    P = np.asarray(P, dtype=np.float64)
    if reduction == "sum":
        return 1.0 - P
    m = P.shape[-1]
    others = np.stack([np.delete(P, y, axis=-1) for y in range(m)], axis=-2)
    if reduction == "product":
        return others.prod(-1) if m > 1 else np.zeros_like(P)
    if reduction == "max":
        return others.max(-1) if m > 1 else np.zeros_like(P)
    raise ValueError(f"unknown conflict reduction {reduction!r}")


def evidence_conflict(P: np.ndarray, y: int) -> EvidencePair:
    P = check_simplex(P)
    return EvidencePair(float(P[y]), float(1.0 - P[y]))


def dst_scores(P1: np.ndarray, P2: np.ndarray, reduction: str = "sum") -> np.ndarray:
    P1, P2 = check_simplex(P1), check_simplex(P2)
    _same_shape(P1, P2)
    num = P1 * P2
    if reduction == "sum":
        # 1 - (1-a)(1-b) written without cancellation
        den = P1 + P2 - P1 * P2
    else:
        den = 1.0 - conflict(P1, reduction) * conflict(P2, reduction)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return np.minimum(out, 1.0)


def dst_fuse(P1: np.ndarray, P2: np.ndarray, renormalize: bool = False,
             reduction: str = "sum") -> FusedDecision:
    scores = dst_scores(P1, P2, reduction)
    chosen = argmax_first(scores)
    if renormalize:
        total = scores.sum(-1, keepdims=True)
        scores = np.divide(scores, total, out=np.zeros_like(scores), where=total > 0)
    return FusedDecision(scores, chosen, Method.DST, renormalize)


def score_fuse(P1: np.ndarray, P2: np.ndarray) -> FusedDecision:
    P1 = np.asarray(P1, dtype=np.float64)
    P2 = np.asarray(P2, dtype=np.float64)
    _same_shape(P1, P2)
    scores = (P1 + P2) / 2.0
    return FusedDecision(scores, argmax_first(scores), Method.SCORE)


class FeatureFusionHead:
    """Softmax regression on concatenated penultimate features of both views."""

    def __init__(self, dim1: int, dim2: int, m: int, seed: int = 0):
        from .models import SoftmaxRegression

        self.dims = (dim1, dim2)
        self.model = SoftmaxRegression(dim1 + dim2, m, seed=seed)

    def _join(self, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
        f1, f2 = np.atleast_2d(f1), np.atleast_2d(f2)
        if f1.shape[1] != self.dims[0] or f2.shape[1] != self.dims[1] or f1.shape[0] != f2.shape[0]:
            raise DimMismatch(f"features {f1.shape} / {f2.shape} do not match head dims {self.dims}")
        return np.hstack([f1, f2])

    def fit(self, f1, f2, labels, config=None):
        from .models import TrainConfig, train

        return train(self.model, self._join(f1, f2), np.asarray(labels), config or TrainConfig())

    def predict(self, f1, f2) -> FusedDecision:
        single = np.ndim(f1) == 1
        probs = self.model.predict_proba(self._join(f1, f2))
        if single:
            probs = probs[0]
        return FusedDecision(probs, argmax_first(probs), Method.FEATURE)


def feature_fuse_train(f1, f2, labels, config=None, m: int | None = None, seed: int = 0) -> FeatureFusionHead:
    f1, f2 = np.atleast_2d(f1), np.atleast_2d(f2)
    m = int(np.max(labels)) + 1 if m is None else m
    head = FeatureFusionHead(f1.shape[1], f2.shape[1], m, seed=seed)
    head.fit(f1, f2, labels, config)
    return head


def feature_fuse_predict(head: FeatureFusionHead, f1, f2) -> FusedDecision:
    return head.predict(f1, f2)

"""Beat segmentation, normalization, train/test splitting and SMOTE balancing."""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyClass, EmptyDataset, EmptyRecord, SingletonClassWarning
from .ingest import Annotation, map_to_aami

log = logging.getLogger(__name__)

DEFAULT_LENGTH = 187


@dataclass(frozen=True)
class Beat:
    samples: np.ndarray
    label: int
    record_id: str = ""
    r_peak: int = -1


def segment_beats(
    signal: np.ndarray,
    rate: float,
    annotations: Iterable[Annotation],
    pre_ms: float = 250.0,
    post_ms: float = 400.0,
    length: int = DEFAULT_LENGTH,
    record_id: str = "",
    classes: Sequence[int] | None = None,
) -> list[Beat]:
    """Cut a window around every beat annotation and resample it to `length` samples.

    The window is ``[r - pre, r + post)`` in samples. Non-beat annotations, beats
    whose AAMI class is not in `classes`, and windows that leave the record are
    dropped. Beats keep physical units; normalization happens later.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.size == 0:
        raise EmptyRecord(f"record {record_id!r} has no samples")
    if pre_ms <= 0 or post_ms <= 0:
        raise ValueError("pre_ms and post_ms must be positive")
    pre = int(round(pre_ms * rate / 1000.0))
    post = int(round(post_ms * rate / 1000.0))
    width = pre + post
    grid = np.linspace(0.0, width - 1, length)
    positions = np.arange(width, dtype=np.float64)
    beats = []
    for ann in annotations:
        cls = map_to_aami(ann.symbol)
        if cls is None or (classes is not None and int(cls) not in classes):
            continue
        start = ann.sample_index - pre
        stop = ann.sample_index + post
        if start < 0 or stop > signal.size:
            continue
        window = signal[start:stop]
        beats.append(Beat(np.interp(grid, positions, window), int(cls), record_id, ann.sample_index))
    return beats


def minmax_normalize(v: np.ndarray) -> np.ndarray:
    """Scale to [0, 1] along the last axis; constant rows map to 0.5."""
    v = np.asarray(v, dtype=np.float64)
    lo = v.min(axis=-1, keepdims=True)
    hi = v.max(axis=-1, keepdims=True)
    span = hi - lo
    flat = span == 0
    out = (v - lo) / np.where(flat, 1.0, span)
    return np.where(flat, 0.5, out)


def stack(beats: Sequence[Beat]) -> tuple[np.ndarray, np.ndarray]:
    if not beats:
        return np.zeros((0, 0)), np.zeros(0, dtype=np.int64)
    return np.stack([b.samples for b in beats]), np.array([b.label for b in beats], dtype=np.int64)


@dataclass
class Dataset:
    """Beats split into train and test parts; `m` is the number of classes."""

    train: list[Beat]
    test: list[Beat]
    m: int
    seed: int
    split_mode: str = "stratified"
    meta: dict = field(default_factory=dict)

    def counts(self) -> dict[str, dict[str, int]]:
        out = {}
        for name, part in (("train", self.train), ("test", self.test)):
            labels = [b.label for b in part]
            out[name] = {str(c): labels.count(c) for c in range(self.m)}
        return out

    def manifest(self) -> dict:
        length = len(self.train[0].samples) if self.train else 0
        return {
            "records": sorted({b.record_id for b in self.train + self.test}),
            "L": length,
            "seed": self.seed,
            "split_mode": self.split_mode,
            "counts": self.counts(),
            **self.meta,
        }

    def write_manifest(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.manifest(), indent=2, sort_keys=True))


def stratified_split(beats: Sequence[Beat], ratio: float = 0.8, seed: int = 0,
                     m: int = 5, classes: Sequence[int] | None = None) -> Dataset:
    """Per-class split: floor(ratio * count) beats of each class go to train.

    Class c is shuffled with its own generator seeded ``seed + c``.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0, 1) so both splits are non-empty, got {ratio}")
    if not beats:
        raise EmptyDataset("no beats to split")
    labels = np.array([b.label for b in beats])
    wanted = sorted(set(labels.tolist())) if classes is None else list(classes)
    train, test = [], []
    for c in wanted:
        idx = np.flatnonzero(labels == c)
        if idx.size == 0:
            raise EmptyClass(f"class {c} has no beats")
        idx = np.random.default_rng(seed + c).permutation(idx)
        k = int(np.floor(ratio * idx.size))
        train += [beats[i] for i in idx[:k]]
        test += [beats[i] for i in idx[k:]]
    if not test:
        raise EmptyDataset("test split is empty")
    return Dataset(train, test, m, seed, "stratified")


def record_split(beats: Sequence[Beat], ratio: float = 0.8, seed: int = 0, m: int = 5) -> Dataset:
    """Split by whole records, so no record contributes to both parts."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    records = sorted({b.record_id for b in beats})
    if len(records) < 2:
        raise EmptyDataset("record split needs at least two records")
    order = np.random.default_rng(seed).permutation(len(records))
    k = min(max(1, int(np.floor(ratio * len(records)))), len(records) - 1)
    train_ids = {records[i] for i in order[:k]}
    train = [b for b in beats if b.record_id in train_ids]
    test = [b for b in beats if b.record_id not in train_ids]
    return Dataset(train, test, m, seed, "record")


@dataclass
class SmoteResult:
    X: np.ndarray
    y: np.ndarray
    n_original: int
    # one row per synthetic sample: (base index, neighbour index, u)
    provenance: np.ndarray


def smote(X: np.ndarray, y: np.ndarray, k: int = 5, seed: int = 0) -> SmoteResult:
    """Oversample every class up to the majority count.

    Synthetic points are ``x + u * (x_nn - x)`` with ``u ~ U(0, 1)`` and ``x_nn``
    drawn from the k nearest same-class neighbours of ``x``. The originals are
    returned first, unchanged and in input order. Class c uses the generator
    seeded ``seed + c``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y lengths differ")
    if X.shape[0] == 0:
        raise EmptyDataset("nothing to oversample")
    classes, counts = np.unique(y, return_counts=True)
    target = counts.max()
    new_X, new_y, prov = [X], [y], []
    for c, n in zip(classes, counts):
        need = target - n
        if need == 0:
            continue
        idx = np.flatnonzero(y == c)
        rng = np.random.default_rng(seed + int(c))
        if n == 1:
            warnings.warn(f"class {c} has a single member; SMOTE degenerates to copies",
                          SingletonClassWarning, stacklevel=2)
            base = np.full(need, idx[0])
            nn = base.copy()
            u = np.zeros(need)
        else:
            kk = min(k, n - 1)
            pts = X[idx]
            sq = (pts ** 2).sum(1)
            d2 = sq[:, None] + sq[None, :] - 2.0 * pts @ pts.T
            np.fill_diagonal(d2, np.inf)
            neigh = np.argsort(d2, axis=1, kind="stable")[:, :kk]
            b_local = rng.integers(0, n, size=need)
            nn_local = neigh[b_local, rng.integers(0, kk, size=need)]
            u = rng.random(need)
            base, nn = idx[b_local], idx[nn_local]
        new_X.append(X[base] + u[:, None] * (X[nn] - X[base]))
        new_y.append(np.full(need, c, dtype=y.dtype))
        prov.append(np.column_stack([base, nn, u]))
    provenance = np.concatenate(prov) if prov else np.zeros((0, 3))
    return SmoteResult(np.concatenate(new_X), np.concatenate(new_y), X.shape[0], provenance)

import warnings

import numpy as np
import pytest

from ecgfusion.beats import Beat, minmax_normalize, record_split, segment_beats, smote, stack, stratified_split
from ecgfusion.errors import EmptyDataset, EmptyRecord, SingletonClassWarning
from ecgfusion.ingest import Annotation


def test_window_boundaries():
    sig = np.zeros(600)
    anns = [Annotation(90, "N"), Annotation(50, "N"), Annotation(400, "+"), Annotation(500, "V")]
    beats = segment_beats(sig, 360, anns)
    # pre = 90, post = 144 samples; 50 underflows, 500 + 144 overflows
    assert [b.r_peak for b in beats] == [90]
    assert beats[0].samples.shape == (187,)


def test_class_filter():
    sig = np.zeros(2000)
    anns = [Annotation(300, "N"), Annotation(700, "V"), Annotation(1100, "A")]
    beats = segment_beats(sig, 360, anns, classes=[0, 2])
    assert [b.label for b in beats] == [0, 2]


def test_constant_and_ramp():
    beats = segment_beats(np.full(1000, 3.5), 360, [Annotation(400, "N")])
    assert np.all(beats[0].samples == 3.5)
    ramp = np.arange(1000, dtype=float)
    b = segment_beats(ramp, 360, [Annotation(400, "N")])[0].samples
    assert b[0] == 310 and b[-1] == 400 + 144 - 1
    assert np.allclose(np.diff(b, 2), 0, atol=1e-9)


def test_empty_record():
    with pytest.raises(EmptyRecord):
        segment_beats(np.zeros(0), 360, [])


def test_minmax():
    assert minmax_normalize(np.array([-1.0, 0, 1])).tolist() == [0, 0.5, 1]
    assert minmax_normalize(np.array([5.0, 5, 5])).tolist() == [0.5] * 3
    v = minmax_normalize(np.random.default_rng(0).normal(size=50))
    assert v.min() == 0 and v.max() == 1


def _beats(counts, length=6, rng=None):
    rng = rng or np.random.default_rng(0)
    out = []
    for c, n in counts.items():
        out += [Beat(rng.normal(size=length), c, f"rec{i % 3}", i) for i in range(n)]
    return out


def test_stratified_split():
    beats = _beats({0: 10, 2: 10})
    ds = stratified_split(beats, 0.8, seed=4)
    c = ds.counts()
    assert (c["train"]["0"], c["train"]["2"], c["test"]["0"], c["test"]["2"]) == (8, 8, 2, 2)
    again = stratified_split(beats, 0.8, seed=4)
    assert [b.r_peak for b in ds.train] == [b.r_peak for b in again.train]
    with pytest.raises(ValueError):
        stratified_split(beats, 1.0)
    with pytest.raises(EmptyDataset):
        stratified_split([], 0.8)


def test_record_split_disjoint():
    ds = record_split(_beats({0: 30}), 0.8, seed=1)
    assert not {b.record_id for b in ds.train} & {b.record_id for b in ds.test}


def test_smote_endpoints_and_balance():
    rng = np.random.default_rng(7)
    X = np.vstack([rng.normal(size=(100, 20)), rng.normal(3, 1, size=(10, 20))])
    y = np.array([0] * 100 + [2] * 10)
    res = smote(X, y, k=5, seed=11)
    assert np.bincount(res.y).tolist() == [100, 0, 100]
    assert np.array_equal(res.X[:110], X)
    syn = res.X[110:]
    base, nn, u = res.provenance[:, 0].astype(int), res.provenance[:, 1].astype(int), res.provenance[:, 2]
    assert np.all(y[base] == 2) and np.all(y[nn] == 2) and np.all(base != nn)
    assert np.all((u >= 0) & (u <= 1))
    recon = X[base] + u[:, None] * (X[nn] - X[base])
    assert np.allclose(recon, syn, atol=1e-12)


def test_smote_singleton_class_warns():
    X = np.vstack([np.zeros((5, 3)), np.ones((1, 3))])
    y = np.array([0] * 5 + [1])
    with pytest.warns(SingletonClassWarning):
        res = smote(X, y)
    assert np.all(res.X[res.y == 1] == 1)


def test_smote_deterministic():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(40, 5)), np.array([0] * 30 + [1] * 10)
    a, b = smote(X, y, seed=3), smote(X, y, seed=3)
    assert np.array_equal(a.X, b.X)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        smote(X, y, seed=3)


def test_stack():
    X, y = stack(_beats({1: 3}))
    assert X.shape == (3, 6) and y.tolist() == [1, 1, 1]

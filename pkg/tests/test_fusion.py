import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecgfusion.errors import BadSimplex, DimMismatch, LengthMismatch
from ecgfusion.fusion import (
    FeatureFusionHead, argmax_first, conflict, dst_fuse, dst_scores, evidence_conflict,
    feature_fuse_predict, feature_fuse_train, score_fuse,
)
from ecgfusion.models import TrainConfig


def simplex(m):
    return st.lists(st.floats(0, 1), min_size=m, max_size=m).filter(lambda v: sum(v) > 1e-3).map(
        lambda v: np.array(v) / sum(v))


def test_evidence_conflict():
    e = evidence_conflict(np.array([1.0, 0, 0]), 0)
    assert (e.evidence, e.conflict) == (1.0, 0.0)
    e = evidence_conflict(np.full(4, 0.25), 2)
    assert (e.evidence, e.conflict) == (0.25, 0.75)


def test_dst_examples():
    assert np.allclose(dst_scores(np.array([0.5, 0.5]), np.array([0.5, 0.5])), [1 / 3, 1 / 3])
    d = dst_fuse(np.array([1.0, 0]), np.array([1.0, 0]))
    assert np.allclose(d.scores, [1, 0]) and d.chosen == 0
    d = dst_fuse(np.array([0.8, 0.2]), np.array([0.6, 0.4]))
    assert np.allclose(d.scores, [0.48 / 0.92, 0.08 / 0.52])
    assert np.allclose(d.scores, [0.52174, 0.15385], atol=1e-4) and d.chosen == 0


def test_zero_over_zero():
    # both views put no mass on class 1 and certainty on class 0
    assert dst_scores(np.array([1.0, 0.0]), np.array([1.0, 0.0]))[1] == 0.0


def test_bad_inputs():
    with pytest.raises(BadSimplex):
        dst_fuse(np.array([0.5, 0.6]), np.array([0.5, 0.5]))
    with pytest.raises(BadSimplex):
        dst_fuse(np.array([np.nan, 1.0]), np.array([0.5, 0.5]))
    with pytest.raises(LengthMismatch):
        dst_fuse(np.array([0.5, 0.5]), np.array([0.2, 0.3, 0.5]))
    with pytest.raises(LengthMismatch):
        score_fuse(np.array([0.5, 0.5]), np.array([0.2, 0.3, 0.5]))


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 5).flatmap(lambda m: st.tuples(simplex(m), simplex(m))))
def test_dst_properties(pair):
    P1, P2 = pair
    a, b = dst_scores(P1, P2), dst_scores(P2, P1)
    assert np.array_equal(a, b)
    assert np.all((a >= 0) & (a <= 1))
    # raising one view's probability of y cannot lower the fused score of y
    y = int(np.argmin(P1))
    Q = P1.copy()
    Q[y] += 0.1
    Q /= Q.sum()
    if Q[y] > P1[y]:
        assert dst_scores(Q, P2)[y] >= a[y] - 1e-12
    # a class both views rank above another stays above
    i, j = int(np.argmax(P1)), int(np.argmin(P1))
    if P1[i] >= P1[j] and P2[i] >= P2[j]:
        assert a[i] >= a[j] - 1e-12
    d0, d1 = dst_fuse(P1, P2), dst_fuse(P1, P2, renormalize=True)
    assert d0.chosen == d1.chosen
    assert np.isclose(d1.scores.sum(), 1.0)


def test_batch_matches_rows(rng):
    P1 = rng.dirichlet(np.ones(5), size=20)
    P2 = rng.dirichlet(np.ones(5), size=20)
    d = dst_fuse(P1, P2)
    assert np.array_equal(d.chosen, [dst_fuse(a, b).chosen for a, b in zip(P1, P2)])


def test_other_reductions(rng):
    P = rng.dirichlet(np.ones(4))
    assert np.allclose(conflict(P, "sum"), 1 - P)
    assert np.allclose(conflict(P, "max")[0], P[1:].max())
    assert np.allclose(conflict(P, "product")[0], P[1:].prod())
    assert dst_scores(P, P, "max").shape == (4,)
    with pytest.raises(ValueError):
        conflict(P, "median")


def test_score_fuse():
    d = score_fuse(np.array([0.3, 0.7]), np.array([0.3, 0.7]))
    assert np.allclose(d.scores, [0.3, 0.7])
    d = score_fuse(np.array([1.0, 0]), np.array([0, 1.0]))
    assert np.allclose(d.scores, [0.5, 0.5]) and d.chosen == 0
    assert argmax_first(np.array([0.2, 0.4, 0.4])) == 1


def test_feature_head(rng):
    f1 = rng.normal(size=(60, 4))
    f2 = rng.normal(size=(60, 3))
    y = (f1[:, 0] + f2[:, 1] > 0).astype(int) + 2 * (f1[:, 2] > 0.5)
    head = feature_fuse_train(f1, f2, y, TrainConfig(lr=0.05, max_epochs=400, patience=None, val_fraction=0), m=4)
    d = feature_fuse_predict(head, f1, f2)
    assert (d.chosen == y).mean() == 1.0
    zero = FeatureFusionHead(4, 3, 4)
    zero.model.zero_()
    assert np.allclose(zero.predict(f1[0], f2[0]).scores, 0.25)
    with pytest.raises(DimMismatch):
        head.predict(f1[:, :3], f2)
    again = feature_fuse_train(f1, f2, y, TrainConfig(lr=0.05, max_epochs=5, patience=None, val_fraction=0), m=4)
    again2 = feature_fuse_train(f1, f2, y, TrainConfig(lr=0.05, max_epochs=5, patience=None, val_fraction=0), m=4)
    assert np.array_equal(again.model.params["W1"], again2.model.params["W1"])

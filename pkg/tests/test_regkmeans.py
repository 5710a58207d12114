import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pacluster.core import InvalidPartitionError, cluster_stats, global_energy
from pacluster.regkmeans import (
    RegKmeansSettings,
    merge_delta,
    point_move_delta,
    point_new_cluster_delta,
    regularized_kmeans,
)


def E(X, labels, lam):
    return global_energy(X, labels, lam).total


@st.composite
def instances(draw, max_n=8, max_k=4):
    n = draw(st.integers(2, max_n))
    d = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    X = rng.normal(scale=draw(st.sampled_from([0.1, 1.0, 10.0])), size=(n, d))
    k = draw(st.integers(1, min(n, max_k)))
    labels = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
    rng.shuffle(labels)
    lam = float(draw(st.floats(1e-3, 1e3)))
    return X, labels, lam


def test_merge_delta_examples():
    a = cluster_stats([[0.0, 0.0]])
    b = cluster_stats([[0.0, 0.0]])
    assert merge_delta(a, b, 1.0) == pytest.approx(-1.5)
    c = cluster_stats([[3.0, 0.0]])
    assert merge_delta(a, c, 1.0) == pytest.approx(9 / 2 - 1.5)
    assert merge_delta(a, c, 2.0) == pytest.approx(merge_delta(c, a, 2.0))
    with pytest.raises(InvalidPartitionError):
        merge_delta(a, a, 1.0)


def test_point_move_identity_and_singleton_route():
    s = cluster_stats([[0.0], [1.0]])
    assert point_move_delta([0.0], s, s, 1.0) == 0.0
    one = cluster_stats([[5.0]])
    assert point_move_delta([5.0], one, s, 1.0) == merge_delta(one, s, 1.0)
    assert point_new_cluster_delta([5.0], one, 1.0) == 0.0


def test_point_move_mirror_symmetry():
    L = np.array([[-1.0, 0.0], [-2.0, 0.5], [0.0, 0.0]])
    R = L * np.array([-1.0, 1.0])
    R[2] = L[2]
    left = cluster_stats(L)
    right = cluster_stats(np.vstack([R[:2], [[0.0, 0.0]]]))
    x = np.array([0.0, 0.0])
    assert point_move_delta(x, left, right, 0.7) == pytest.approx(point_move_delta(x, right, left, 0.7), rel=1e-12)


def test_new_cluster_at_centroid_never_splits():
    s = cluster_stats([[0.0], [2.0], [4.0]])
    assert point_new_cluster_delta([2.0], s, 1.0) == pytest.approx(1.0 / 6 + 1.0)


@pytest.mark.parametrize("a", [2, 3, 10, 1000])
def test_new_cluster_boundary(a):
    lam = 0.3
    r2 = lam * (1 - 1 / a + 1 / a**2)
    # a cluster of size a with centroid 0 and a member at distance sqrt(r2)
    s = cluster_stats(np.vstack([[np.sqrt(r2)], np.full((a - 1, 1), -np.sqrt(r2) / (a - 1))]))
    assert abs(s.centroid[0]) < 1e-12
    assert point_new_cluster_delta([np.sqrt(r2)], s, lam) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=300)
@given(instances())
def test_point_deltas_match_oracle(inst):
    X, labels, lam = inst
    k = labels.max() + 1
    before = E(X, labels, lam)
    p = 0
    i = labels[p]
    src = cluster_stats(X[labels == i])
    for j in range(k):
        if j == i:
            continue
        after = labels.copy()
        after[p] = j
        after = np.unique(after, return_inverse=True)[1]
        d = point_move_delta(X[p], src, cluster_stats(X[labels == j]), lam)
        assert d == pytest.approx(E(X, after, lam) - before, rel=1e-9, abs=1e-9 * before)
    if src.size > 1:
        after = labels.copy()
        after[p] = k
        d = point_new_cluster_delta(X[p], src, lam)
        assert d == pytest.approx(E(X, after, lam) - before, rel=1e-9, abs=1e-9 * before)


@settings(max_examples=200)
@given(instances())
def test_merge_delta_matches_oracle(inst):
    X, labels, lam = inst
    k = labels.max() + 1
    if k < 2:
        return
    before = E(X, labels, lam)
    for i, j in itertools.combinations(range(k), 2):
        after = np.where(labels == j, i, labels)
        after = np.unique(after, return_inverse=True)[1]
        d = merge_delta(cluster_stats(X[labels == i]), cluster_stats(X[labels == j]), lam)
        assert d == pytest.approx(E(X, after, lam) - before, rel=1e-9, abs=1e-9 * before)


def test_two_point_threshold():
    X = np.array([[0.0, 0.0], [2.0, 0.0]])
    assert regularized_kmeans(X, RegKmeansSettings(1.0)).k == 2
    assert regularized_kmeans(X, RegKmeansSettings(2.0)).k == 1
    # the oracle agrees: d^2 = 4 against 3 * lambda
    for lam, want in ((1.0, 2), (2.0, 1)):
        e1 = E(X, [0, 0], lam)
        e2 = E(X, [0, 1], lam)
        assert (2 if e2 < e1 else 1) == want


def test_single_point():
    r = regularized_kmeans([[3.0, 4.0]], RegKmeansSettings(1.0))
    assert r.k == 1 and r.labels.tolist() == [0]


def test_settings_validation():
    with pytest.raises(ValueError):
        RegKmeansSettings(0.0)
    with pytest.raises(ValueError):
        RegKmeansSettings(1.0, tol=-1.0)
    with pytest.raises(ValueError):
        RegKmeansSettings(1.0, iter_max=0)
    assert RegKmeansSettings(1.0).resolve_tol(-200.0) == pytest.approx(2e-6)
    assert RegKmeansSettings(1.0, tol=0.5).resolve_tol(1e9) == 0.5


def _check_converged(X, res, lam):
    labels = res.labels
    k = res.k
    assert sorted(set(labels.tolist())) == list(range(k))
    trace = res.trace
    for s in range(trace.sweeps + 1):
        assert trace.tracked_energy[s] == pytest.approx(trace.energy[s], rel=1e-9)
    assert trace.energy[-1] == pytest.approx(E(X, labels, lam), rel=1e-9)
    assert np.all(np.diff(trace.energy) <= 1e-9 * trace.energy[0])
    stats = [cluster_stats(X[labels == c]) for c in range(k)]
    for s in stats:
        assert s.radius**2 <= lam * (1 + 1e-9)
        assert s.variance <= lam * (1 + 1e-9)
    for a, b in itertools.combinations(stats, 2):
        assert merge_delta(a, b, lam) >= -1e-9 * trace.energy[-1]


@pytest.mark.parametrize("seed", range(6))
def test_converged_output_properties(seed):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0, 1, size=(4, 2))
    X = np.vstack([c + 0.05 * rng.normal(size=(150, 2)) for c in centers])
    lam = 0.05
    res = regularized_kmeans(X, RegKmeansSettings(lam))
    assert res.trace.sweeps < 100
    _check_converged(X, res, lam)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(1, 60), st.floats(0.01, 5.0))
def test_converged_small_random(seed, n, lam):
    X = np.random.default_rng(seed).normal(size=(n, 2))
    res = regularized_kmeans(X, RegKmeansSettings(lam))
    _check_converged(X, res, lam)


def test_larger_lambda_gives_fewer_clusters(rng):
    X = rng.uniform(size=(400, 2))
    ks = [regularized_kmeans(X, RegKmeansSettings(lam)).k for lam in (0.005, 0.05, 0.5)]
    assert ks[0] > ks[1] > ks[2]


def test_deterministic(rng):
    X = rng.normal(size=(300, 3))
    a = regularized_kmeans(X, RegKmeansSettings(0.5))
    b = regularized_kmeans(X, RegKmeansSettings(0.5))
    np.testing.assert_array_equal(a.labels, b.labels)

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pacluster.core import (
    ClusterSet,
    ClusterSummary,
    InvalidDataError,
    InvalidPartitionError,
    NonFiniteError,
    Partition,
    as_dataset,
    cluster_stats,
    global_energy,
    summary_apply,
)

finite = st.floats(-100, 100, allow_nan=False)


def test_as_dataset_shapes_and_errors():
    assert as_dataset([1.0, 2.0]).shape == (1, 2)
    assert as_dataset([[1, 2], [3, 4]]).dtype == np.float64
    with pytest.raises(InvalidDataError):
        as_dataset(np.zeros((0, 2)))
    with pytest.raises(InvalidDataError):
        as_dataset(np.zeros((2, 2, 2)))
    with pytest.raises(NonFiniteError):
        as_dataset([[0.0, np.nan]])
    with pytest.raises(NonFiniteError):
        as_dataset([[np.inf, 0.0]])
    assert as_dataset(np.zeros((0, 2)), allow_empty=True).shape == (0, 2)


def test_cluster_stats_by_hand():
    s = cluster_stats([[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]])
    assert s.size == 3
    np.testing.assert_allclose(s.coord_sum, [3.0, 3.0])
    np.testing.assert_allclose(s.centroid, [1.0, 1.0])
    # squared distances to (1,1): 2, 2, 4
    assert s.scatter == pytest.approx(8.0)
    assert s.radius == pytest.approx(2.0)
    assert s.variance == pytest.approx(8.0 / 3)


def test_cluster_stats_empty_raises():
    with pytest.raises(InvalidDataError):
        cluster_stats(np.zeros((0, 2)))


def test_empty_summary():
    e = ClusterSummary.empty(3)
    assert e.size == 0 and e.dim == 3 and e.variance == 0.0
    np.testing.assert_array_equal(e.centroid, np.zeros(3))


@given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 3)), elements=finite), st.data())
def test_add_then_remove_restores(P, data):
    base = cluster_stats(P)
    x = data.draw(arrays(np.float64, P.shape[1], elements=finite))
    back = summary_apply(summary_apply(base, x, "add"), x, "remove")
    assert back.size == base.size
    np.testing.assert_allclose(back.coord_sum, base.coord_sum, atol=1e-9 * (1 + np.abs(P).max()))
    assert back.scatter == pytest.approx(base.scatter, rel=1e-7, abs=1e-7 * (1 + np.abs(P).max() ** 2))
    assert back.radius is None


@given(arrays(np.float64, st.tuples(st.integers(1, 40), st.integers(1, 3)), elements=finite), st.randoms())
def test_incremental_adds_match_batch_stats(P, rnd):
    order = list(range(P.shape[0]))
    rnd.shuffle(order)
    s = ClusterSummary.empty(P.shape[1])
    for i in order:
        s = summary_apply(s, P[i], "add")
    ref = cluster_stats(P)
    scale = 1 + np.abs(P).max()
    np.testing.assert_allclose(s.centroid, ref.centroid, atol=1e-7 * scale)
    assert s.scatter == pytest.approx(ref.scatter, rel=1e-7, abs=1e-7 * scale**2)


def test_summary_apply_edge_cases():
    one = cluster_stats([[1.0, 2.0]])
    empty = summary_apply(one, [1.0, 2.0], "remove")
    assert empty.size == 0 and empty.scatter == 0.0
    with pytest.raises(InvalidPartitionError):
        summary_apply(empty, [0.0, 0.0], "remove")
    with pytest.raises(ValueError):
        summary_apply(one, [0.0, 0.0], "sideways")


def test_global_energy_by_hand():
    X = np.array([[0.0], [2.0], [10.0]])
    e = global_energy(X, [0, 0, 1], lam=1.0)
    # cluster {0,2}: 1/2 + (1 + 1); cluster {10}: 1/1 + 0
    assert e.regularization_term == pytest.approx(1.5)
    assert e.fitting_term == pytest.approx(2.0)
    assert e.total == pytest.approx(3.5)


def test_global_energy_rejects_empty_clusters():
    X = np.zeros((3, 1))
    with pytest.raises(InvalidPartitionError):
        global_energy(X, [0, 2, 2], 1.0)
    with pytest.raises(InvalidPartitionError):
        global_energy(X, [0, 1, 1], 1.0, n_clusters=3)
    with pytest.raises(InvalidPartitionError):
        global_energy(X, [0, 1], 1.0)


def test_partition_from_labels_compacts():
    p = Partition.from_labels([5, 5, 2, 9])
    np.testing.assert_array_equal(p.labels, [1, 1, 0, 2])
    assert p.k == 3
    assert [m.tolist() for m in p.member_lists] == [[2], [0, 1], [3]]


def test_partition_clusters_need_data():
    p = Partition.from_labels([0, 1])
    with pytest.raises(InvalidPartitionError):
        p.clusters()
    cl = p.clusters(np.array([[0.0], [1.0]]))
    assert [c.size for c in cl] == [1, 1]


def test_cluster_set_matches_cluster_stats(rng):
    X = rng.normal(size=(200, 3))
    labels = rng.integers(0, 7, size=200)
    labels = np.unique(labels, return_inverse=True)[1]
    cs = ClusterSet.from_labels(X, labels)
    for i, s in enumerate(cs.summaries()):
        ref = cluster_stats(X[labels == i])
        assert s.size == ref.size
        np.testing.assert_allclose(s.coord_sum, ref.coord_sum, rtol=1e-12, atol=1e-12)
        assert s.scatter == pytest.approx(ref.scatter, rel=1e-12)
        assert s.radius == pytest.approx(ref.radius, rel=1e-12)
    np.testing.assert_allclose(cs.centroids * cs.sizes[:, None], cs.coord_sums, rtol=1e-12)


def test_cluster_set_concat_offsets_labels(rng):
    X1, X2 = rng.normal(size=(10, 2)), rng.normal(size=(6, 2))
    a = ClusterSet.from_labels(X1, [0] * 5 + [1] * 5, thread=[0, 0])
    b = ClusterSet.from_labels(X2, [0, 1, 2, 0, 1, 2], thread=[1, 1, 1])
    c = ClusterSet.concat([a, b])
    assert len(c) == 5
    np.testing.assert_array_equal(c.labels[10:], np.array([0, 1, 2, 0, 1, 2]) + 2)
    np.testing.assert_array_equal(c.thread, [0, 0, 1, 1, 1])
    ref = ClusterSet.from_labels(np.vstack([X1, X2]), c.labels)
    np.testing.assert_allclose(ref.coord_sums, c.coord_sums, rtol=1e-12)


def test_cluster_set_rejects_gaps():
    with pytest.raises(InvalidPartitionError):
        ClusterSet.from_labels(np.zeros((2, 1)), [0, 2])

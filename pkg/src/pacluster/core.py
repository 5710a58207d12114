"""Domain types and full-summation energy oracles.

Everything here is deliberately naive: the energies are recomputed from the
raw member points, never from incremental bookkeeping, so the faster paths
elsewhere in the package can be checked against them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np


class PacError(Exception):
    """Base class for errors raised by this package."""


class InvalidPartitionError(PacError):
    pass


class InvalidDataError(PacError):
    pass


class NonFiniteError(InvalidDataError):
    """NaN or infinity where a finite number is required."""


def as_dataset(points, *, allow_empty: bool = False) -> np.ndarray:
    """Validate ``points`` and return them as a C-contiguous (n, d) float64 array."""
    X = np.ascontiguousarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.size else X.reshape(0, 0)
    if X.ndim != 2:
        raise InvalidDataError(f"expected a 2-d array of points, got shape {X.shape}")
    if X.shape[0] == 0 and not allow_empty:
        raise InvalidDataError("dataset is empty")
    if X.shape[0] and X.shape[1] == 0:
        raise InvalidDataError("points have dimension 0")
    if not np.all(np.isfinite(X)):
        raise NonFiniteError("dataset contains NaN or infinite coordinates")
    return X


@dataclass(frozen=True)
class ClusterSummary:
    """Sufficient statistics of one cluster.

    ``radius`` is None when it is stale, which is what ``summary_apply``
    produces: removing a point can shrink the radius and that cannot be
    known without the member list.
    """

    size: int
    coord_sum: np.ndarray
    scatter: float
    radius: Optional[float] = None

    @property
    def centroid(self) -> np.ndarray:
        if self.size == 0:
            return np.zeros_like(self.coord_sum)
        return self.coord_sum / self.size

    @property
    def dim(self) -> int:
        return self.coord_sum.shape[0]

    @property
    def variance(self) -> float:
        return self.scatter / self.size if self.size else 0.0

    @classmethod
    def empty(cls, dim: int) -> "ClusterSummary":
        return cls(0, np.zeros(dim), 0.0, 0.0)


def cluster_stats(points) -> ClusterSummary:
    P = np.asarray(points, dtype=np.float64)
    if P.ndim == 1:
        P = P.reshape(1, -1)
    if P.shape[0] == 0:
        raise InvalidDataError("cannot summarise an empty point list")
    s = P.sum(axis=0)
    c = s / P.shape[0]
    sq = ((P - c) ** 2).sum(axis=1)
    return ClusterSummary(P.shape[0], s, float(sq.sum()), float(np.sqrt(sq.max())))


def summary_apply(summary: ClusterSummary, point, direction: str) -> ClusterSummary:
    """Add or remove a single point, updating the scatter with the one-point identity."""
    x = np.asarray(point, dtype=np.float64)
    n = summary.size
    if direction == "add":
        if n == 0:
            return ClusterSummary(1, x.copy(), 0.0, None)
        d2 = float(((x - summary.centroid) ** 2).sum())
        return ClusterSummary(n + 1, summary.coord_sum + x, summary.scatter + n / (n + 1) * d2, None)
    if direction == "remove":
        if n == 0:
            raise InvalidPartitionError("cannot remove a point from an empty cluster")
        if n == 1:
            return ClusterSummary(0, np.zeros_like(summary.coord_sum), 0.0, 0.0)
        d2 = float(((x - summary.centroid) ** 2).sum())
        scatter = max(summary.scatter - n / (n - 1) * d2, 0.0)
        return ClusterSummary(n - 1, summary.coord_sum - x, scatter, None)
    raise ValueError(f"direction must be 'add' or 'remove', not {direction!r}")


@dataclass(frozen=True)
class EnergyValue:
    regularization_term: float
    fitting_term: float

    @property
    def total(self) -> float:
        return self.regularization_term + self.fitting_term


def _labels_to_members(labels: np.ndarray, k: int) -> list[np.ndarray]:
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(k + 1))
    return [order[bounds[i]:bounds[i + 1]] for i in range(k)]


@dataclass
class Partition:
    """A disjoint cover of a dataset, stored as per-point cluster labels.

    Labels are contiguous 0..k-1. Cluster summaries and member lists are
    built on first access.
    """

    labels: np.ndarray
    _members: Optional[list] = field(default=None, repr=False, compare=False)
    _clusters: Optional[list] = field(default=None, repr=False, compare=False)
    _data: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @classmethod
    def from_labels(cls, labels, data=None) -> "Partition":
        lab = np.asarray(labels)
        if lab.ndim != 1:
            raise InvalidPartitionError("labels must be one-dimensional")
        _, lab = np.unique(lab, return_inverse=True)
        return cls(lab.astype(np.int64), _data=None if data is None else as_dataset(data))

    @property
    def k(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def member_lists(self) -> list[np.ndarray]:
        if self._members is None:
            self._members = _labels_to_members(self.labels, self.k)
        return self._members

    def clusters(self, data=None) -> list[ClusterSummary]:
        if data is not None:
            self._data = as_dataset(data)
            self._clusters = None
        if self._clusters is None:
            if self._data is None:
                raise InvalidPartitionError("partition has no data attached")
            self._clusters = [cluster_stats(self._data[m]) for m in self.member_lists]
        return self._clusters


PartitionLike = Union[Partition, np.ndarray, Sequence[int]]


def _as_labels(partition: PartitionLike, n: int) -> np.ndarray:
    labels = partition.labels if isinstance(partition, Partition) else np.asarray(partition)
    if labels.shape != (n,):
        raise InvalidPartitionError(f"partition labels {labels.shape} do not cover {n} points")
    return labels


def global_energy(data, partition: PartitionLike, lam: float, n_clusters: Optional[int] = None) -> EnergyValue:
    """Regularized k-means energy by full summation.

    Labels must be 0..k-1 with every cluster populated; a gap (or a declared
    ``n_clusters`` that some label never reaches) means an empty cluster and
    raises ``InvalidPartitionError``.
    """
    X = as_dataset(data)
    labels = _as_labels(partition, X.shape[0])
    uniq = np.unique(labels)
    k = int(uniq[-1]) + 1 if n_clusters is None else n_clusters
    if uniq.size != k or uniq[0] != 0 or uniq[-1] != k - 1:
        raise InvalidPartitionError("partition contains an empty cluster")
    reg = 0.0
    fit = 0.0
    for g in uniq:
        P = X[labels == g]
        c = P.mean(axis=0)
        reg += lam / P.shape[0]
        fit += float(((P - c) ** 2).sum())
    return EnergyValue(reg, fit)


@dataclass
class ClusterSet:
    """A partition kept as flat arrays, with radii.

    This is the form the parallel step's output takes: ``labels`` maps each
    point to a cluster, ``thread`` records which subset produced each cluster.
    """

    labels: np.ndarray
    sizes: np.ndarray
    coord_sums: np.ndarray
    scatter: np.ndarray
    radius: np.ndarray
    thread: np.ndarray

    @property
    def centroids(self) -> np.ndarray:
        return self.coord_sums / self.sizes[:, None]

    def __len__(self) -> int:
        return self.sizes.shape[0]

    @classmethod
    def from_labels(cls, data, labels, thread=None) -> "ClusterSet":
        X = as_dataset(data)
        labels = np.asarray(labels, dtype=np.int64)
        k = int(labels.max()) + 1
        d = X.shape[1]
        sizes = np.bincount(labels, minlength=k).astype(np.int64)
        if np.any(sizes == 0):
            raise InvalidPartitionError("cluster set has an empty cluster")
        sums = np.empty((k, d))
        for t in range(d):
            sums[:, t] = np.bincount(labels, weights=X[:, t], minlength=k)
        sq = ((X - (sums / sizes[:, None])[labels]) ** 2).sum(axis=1)
        scatter = np.bincount(labels, weights=sq, minlength=k)
        rmax = np.zeros(k)
        np.maximum.at(rmax, labels, sq)
        if thread is None:
            thread = np.zeros(k, dtype=np.int64)
        return cls(labels, sizes, sums, scatter, np.sqrt(rmax), np.asarray(thread, dtype=np.int64))

    def summaries(self) -> list[ClusterSummary]:
        return [
            ClusterSummary(int(self.sizes[i]), self.coord_sums[i].copy(), float(self.scatter[i]), float(self.radius[i]))
            for i in range(len(self))
        ]

    @classmethod
    def concat(cls, parts: Sequence["ClusterSet"]) -> "ClusterSet":
        """Stack cluster sets over datasets concatenated in the same order."""
        labels = []
        base = 0
        for part in parts:
            labels.append(part.labels + base)
            base += len(part)
        return cls(
            np.concatenate(labels),
            np.concatenate([p.sizes for p in parts]),
            np.concatenate([p.coord_sums for p in parts]),
            np.concatenate([p.scatter for p in parts]),
            np.concatenate([p.radius for p in parts]),
            np.concatenate([p.thread for p in parts]),
        )

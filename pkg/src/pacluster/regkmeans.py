"""Regularized k-means with cluster merging.

The number of clusters is not an input. Every point starts in one cluster;
each sweep visits the points in order and moves a point wherever the energy
drops most (possibly into a brand new cluster), then a pairwise scan merges
any two clusters whose union has lower energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .core import ClusterSummary, InvalidPartitionError, Partition, as_dataset

DEFAULT_REL_TOL = 1e-8


@dataclass(frozen=True)
class RegKmeansSettings:
    lam: float
    tol: Optional[float] = None  # absolute; None -> DEFAULT_REL_TOL * initial energy
    iter_max: int = 100

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.tol is not None and not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.iter_max < 1:
            raise ValueError("iter_max must be at least 1")

    def resolve_tol(self, initial_energy: float) -> float:
        if self.tol is not None:
            return self.tol
        return DEFAULT_REL_TOL * abs(initial_energy)


def _sq(a, b) -> float:
    u = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(u @ u)


def merge_delta(a: ClusterSummary, b: ClusterSummary, lam: float) -> float:
    """Energy change from merging clusters ``a`` and ``b``."""
    if a is b:
        raise InvalidPartitionError("a cluster cannot be merged with itself")
    if a.size == 0 or b.size == 0:
        raise InvalidPartitionError("merge of an empty cluster")
    na, nb = a.size, b.size
    return na * nb / (na + nb) * _sq(a.centroid, b.centroid) + lam * (
        1.0 / (na + nb) - 1.0 / na - 1.0 / nb
    )


def point_move_delta(x, src: ClusterSummary, dst: ClusterSummary, lam: float) -> float:
    """Energy change from moving member ``x`` of ``src`` into ``dst``.

    When ``x`` is the only member of ``src`` the move removes ``src``, so the
    merge formula is used instead.
    """
    if src is dst:
        return 0.0
    if src.size == 1:
        return merge_delta(src, dst, lam)
    ni, nj = src.size, dst.size
    return (
        lam / (ni * (ni - 1))
        - lam / (nj * (nj + 1))
        + nj / (nj + 1) * _sq(dst.centroid, x)
        - ni / (ni - 1) * _sq(src.centroid, x)
    )


def point_new_cluster_delta(x, src: ClusterSummary, lam: float) -> float:
    """Energy change from moving ``x`` out of ``src`` into a new cluster of its own."""
    ni = src.size
    if ni <= 1:
        return 0.0
    return lam / (ni * (ni - 1)) + lam - ni / (ni - 1) * _sq(src.centroid, x)


@dataclass
class RkmTrace:
    """Per-sweep record; entry 0 is the initial single-cluster state."""

    energy: np.ndarray
    tracked_energy: np.ndarray
    moves: np.ndarray
    merges: np.ndarray
    k: np.ndarray
    tol: float

    @property
    def sweeps(self) -> int:
        return len(self.energy) - 1


@dataclass
class RkmResult:
    partition: Partition
    trace: RkmTrace = field(repr=False)

    @property
    def labels(self) -> np.ndarray:
        return self.partition.labels

    @property
    def k(self) -> int:
        return self.partition.k


def initial_energy(X: np.ndarray, w: np.ndarray, lam: float) -> float:
    W = w.sum()
    c = (w[:, None] * X).sum(axis=0) / W
    return lam / W + float((w * ((X - c) ** 2).sum(axis=1)).sum())


def run_weighted(X: np.ndarray, w: np.ndarray, settings: RegKmeansSettings):
    """Run the compiled loop; returns (labels, trace)."""
    tol = settings.resolve_tol(initial_energy(X, w, settings.lam))
    labels, k, sweeps, e, t, mv, mg, kk = _kernels.rkm(X, w, float(settings.lam), float(tol), int(settings.iter_max))
    return labels, RkmTrace(e, t, mv, mg, kk, tol)


def regularized_kmeans(data, settings: RegKmeansSettings) -> RkmResult:
    X = as_dataset(data)
    labels, trace = run_weighted(X, np.ones(X.shape[0]), settings)
    return RkmResult(Partition(labels, _data=X), trace)

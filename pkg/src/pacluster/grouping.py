"""Regularized set k-means: clustering clusters.

Each input cluster acts as a point located at its centroid with mass equal to
its size. A group's size is the total mass of its member clusters. The
optimizer is the same sweep-and-merge loop as for points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .core import ClusterSummary, EnergyValue, InvalidPartitionError
from .regkmeans import RegKmeansSettings, RkmTrace, run_weighted


@dataclass(frozen=True)
class GroupSummary:
    member_clusters: tuple
    size: int
    coord_sum: np.ndarray

    @property
    def centroid(self) -> np.ndarray:
        return self.coord_sum / self.size

    @classmethod
    def from_clusters(cls, ids: Sequence[int], clusters: Sequence[ClusterSummary]) -> "GroupSummary":
        ids = tuple(int(i) for i in ids)
        if not ids:
            raise InvalidPartitionError("empty group")
        size = sum(clusters[i].size for i in ids)
        coord_sum = np.sum([clusters[i].coord_sum for i in ids], axis=0)
        return cls(ids, size, coord_sum)


@dataclass
class Grouping:
    assignment: np.ndarray
    groups: list
    trace: Optional[RkmTrace] = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return len(self.groups)

    @classmethod
    def from_assignment(cls, assignment, clusters: Sequence[ClusterSummary], trace=None) -> "Grouping":
        assignment = np.asarray(assignment, dtype=np.int64)
        if assignment.shape != (len(clusters),):
            raise InvalidPartitionError("assignment does not cover the clusters")
        k = int(assignment.max()) + 1
        groups = []
        for g in range(k):
            ids = np.flatnonzero(assignment == g)
            groups.append(GroupSummary.from_clusters(ids, clusters))
        return cls(assignment, groups, trace)


def group_energy(clusters: Sequence[ClusterSummary], grouping: Union[Grouping, np.ndarray], lam_g: float) -> EnergyValue:
    """Set k-means energy by full summation over member clusters."""
    assignment = grouping.assignment if isinstance(grouping, Grouping) else np.asarray(grouping)
    if assignment.shape != (len(clusters),):
        raise InvalidPartitionError("grouping does not cover the clusters")
    k = int(assignment.max()) + 1
    reg = 0.0
    fit = 0.0
    for g in range(k):
        ids = np.flatnonzero(assignment == g)
        if ids.size == 0:
            raise InvalidPartitionError(f"group {g} is empty")
        sizes = np.array([clusters[i].size for i in ids], dtype=np.float64)
        cents = np.array([clusters[i].centroid for i in ids])
        W = sizes.sum()
        gc = (sizes[:, None] * cents).sum(axis=0) / W
        reg += lam_g / W
        fit += float((sizes * ((cents - gc) ** 2).sum(axis=1)).sum())
    return EnergyValue(reg, fit)


def _sq(a, b) -> float:
    u = np.asarray(a) - np.asarray(b)
    return float(u @ u)


def group_merge_delta(gi, gj, lam_g: float) -> float:
    a, b = gi.size, gj.size
    return a * b / (a + b) * _sq(gi.centroid, gj.centroid) + lam_g * (1.0 / (a + b) - 1.0 / a - 1.0 / b)


def group_move_delta(c: ClusterSummary, src: GroupSummary, dst: GroupSummary, lam_g: float) -> float:
    """Energy change from moving cluster ``c`` from group ``src`` to ``dst``."""
    if src is dst:
        return 0.0
    m, a, b = c.size, src.size, dst.size
    if a == m:
        return group_merge_delta(src, dst, lam_g)
    return (
        lam_g * m / (a * (a - m))
        - lam_g * m / (b * (b + m))
        + b * m / (b + m) * _sq(dst.centroid, c.centroid)
        - a * m / (a - m) * _sq(src.centroid, c.centroid)
    )


def group_new_delta(c: ClusterSummary, src: GroupSummary, lam_g: float) -> float:
    """Energy change from splitting cluster ``c`` off into a group of its own."""
    m, a = c.size, src.size
    if a == m:
        return 0.0
    return lam_g * m / (a * (a - m)) + lam_g / m - a * m / (a - m) * _sq(src.centroid, c.centroid)


def regularized_set_kmeans(clusters: Sequence[ClusterSummary], settings: RegKmeansSettings) -> Grouping:
    """Group ``clusters`` (visited in the given order) by minimizing the set energy."""
    if len(clusters) == 0:
        raise InvalidPartitionError("no clusters to group")
    sizes = np.array([c.size for c in clusters], dtype=np.float64)
    cents = np.ascontiguousarray([c.centroid for c in clusters], dtype=np.float64)
    return group_arrays(cents, sizes, clusters, settings)


def group_arrays(cents: np.ndarray, sizes: np.ndarray, clusters, settings: RegKmeansSettings) -> Grouping:
    labels, trace = run_weighted(cents, sizes, settings)
    return Grouping.from_assignment(labels, clusters, trace)

"""End-to-end parallel adaptive clustering.

1. shuffle the data into ``n`` equal subsets,
2. run regularized k-means on every subset concurrently,
3. group the resulting clusters with the set variant,
4. refine point assignments across groups.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _rng
from .core import ClusterSet, InvalidDataError, Partition, as_dataset
from .grouping import Grouping, group_arrays
from .refinement import RefineResult, omega_guard, refine
from .regkmeans import RegKmeansSettings, run_weighted

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PacConfig:
    n_threads: int = 16
    lambda_c: float = 0.05
    epsilon: float = 0.05
    tol: Optional[float] = None
    iter_max: int = 100
    seed: int = 0
    lambda_g: Optional[float] = None  # overrides the epsilon rule when set
    nu: float = 0.1  # streaming only
    workers: Optional[int] = None  # pool size; default min(n_threads, cpu count)

    def __post_init__(self):
        if self.n_threads < 1:
            raise ValueError("n_threads must be >= 1")
        if not self.lambda_c > 0:
            raise ValueError("lambda_c must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.lambda_g is not None and not self.lambda_g > 0:
            raise ValueError("lambda_g must be positive")
        if not 0 <= self.nu < 1:
            raise ValueError("nu must lie in [0, 1)")

    def settings(self, lam: float) -> RegKmeansSettings:
        return RegKmeansSettings(lam, self.tol, self.iter_max)

    def pool_size(self) -> int:
        if self.workers is not None:
            return max(1, self.workers)
        return max(1, min(self.n_threads, os.cpu_count() or 1))


@dataclass
class PhaseTrace:
    clusters: int
    energy: float
    seconds: float


@dataclass
class ParallelResult:
    atoms: ClusterSet
    subsets: list
    traces: list = field(repr=False)
    energy: float = 0.0
    seconds: float = 0.0


@dataclass
class PacResult:
    partition: Partition
    lambda_g: float
    parallel: ParallelResult = field(repr=False)
    grouping: Grouping = field(repr=False)
    grouped_labels: np.ndarray = field(repr=False)
    refinement: RefineResult = field(repr=False)
    phases: dict = field(default_factory=dict)
    omega_ok: bool = True

    @property
    def labels(self) -> np.ndarray:
        return self.partition.labels

    @property
    def k(self) -> int:
        return self.partition.k

    @property
    def parallel_clusters(self) -> ClusterSet:
        return self.parallel.atoms


def split_random(n_points: int, n: int, seed: int, step: int = 0) -> list[np.ndarray]:
    """Random disjoint index subsets of ``range(n_points)`` with sizes differing by at most one.

    ``step`` selects an independent shuffle for later batches of a stream;
    step 0 is the shuffle a one-shot fit uses.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > n_points:
        raise InvalidDataError(f"cannot split {n_points} points into {n} non-empty subsets")
    rng = _rng.stream(seed, "shuffle") if step == 0 else _rng.stream(seed, "shuffle", step)
    perm = rng.permutation(n_points)
    return [np.ascontiguousarray(s, dtype=np.int64) for s in np.array_split(perm, n)]


def lambda_g_from_epsilon(epsilon: float, n_points: int, n_clusters: int) -> float:
    return epsilon * (n_points / n_clusters) ** 2


def lambda_g_time(epsilon: float, x_t: int, c_t: int, x_1: int, nu: float) -> float:
    """Grouping parameter for a stream that has grown from ``x_1`` to ``x_t`` points."""
    return epsilon * (x_t / c_t) ** 2 * (x_t / x_1) ** nu


def _cluster_subset(X, idx, settings):
    Xp = np.ascontiguousarray(X[idx])
    labels, trace = run_weighted(Xp, np.ones(idx.size), settings)
    return labels, trace


def parallel_phase(X: np.ndarray, subsets: Sequence[np.ndarray], config: PacConfig, thread_offset: int = 0) -> ParallelResult:
    """Cluster each subset independently; returns the collected clusters over all of ``X``.

    Clusters are ordered by (subset, local cluster id). Every point of ``X``
    must belong to exactly one subset.
    """
    settings = config.settings(config.lambda_c)
    t0 = time.perf_counter()
    workers = min(config.pool_size(), len(subsets))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(lambda idx: _cluster_subset(X, idx, settings), subsets))
    else:
        outs = [_cluster_subset(X, idx, settings) for idx in subsets]
    seconds = time.perf_counter() - t0

    labels = np.full(X.shape[0], -1, dtype=np.int64)
    thread = []
    base = 0
    for p, (idx, (lab, _)) in enumerate(zip(subsets, outs)):
        labels[idx] = lab + base
        k = int(lab.max()) + 1
        thread.extend([p + thread_offset] * k)
        base += k
    if np.any(labels < 0):
        raise InvalidDataError("subsets do not cover the dataset")
    atoms = ClusterSet.from_labels(X, labels, thread)
    traces = [tr for _, tr in outs]
    energy = float(sum(tr.energy[-1] for tr in traces))
    return ParallelResult(atoms, list(subsets), traces, energy, seconds)


def group_and_refine(X: np.ndarray, par: ParallelResult, lam_g: float, config: PacConfig, *, audit: float = 0.0) -> PacResult:
    atoms = par.atoms
    settings = config.settings(lam_g)
    omega_ok = omega_guard(config.lambda_c, lam_g, int(atoms.sizes.min()))
    if not omega_ok:
        log.warning(
            "lambda_g=%g is too small relative to lambda_c=%g for the smallest parallel cluster (%d points); "
            "refinement may prefer new clusters it cannot create",
            lam_g, config.lambda_c, int(atoms.sizes.min()),
        )

    t0 = time.perf_counter()
    grouping = group_arrays(atoms.centroids, atoms.sizes.astype(np.float64), atoms.summaries(), settings)
    t_group = time.perf_counter() - t0
    grouped = grouping.assignment[atoms.labels]

    t0 = time.perf_counter()
    ref = refine(X, grouped, atoms, lam_g, settings, workers=config.pool_size(), audit=audit, seed=config.seed)
    t_ref = time.perf_counter() - t0

    phases = {
        "parallel": PhaseTrace(len(atoms), par.energy, par.seconds),
        "grouping": PhaseTrace(grouping.k, float(grouping.trace.energy[-1]), t_group),
        "refinement": PhaseTrace(ref.k, ref.trace[-1].energy, t_ref),
    }
    return PacResult(ref.partition, lam_g, par, grouping, grouped, ref, phases, omega_ok)


def pac_fit(data, config: PacConfig, subsets: Optional[Sequence[np.ndarray]] = None, *, audit: float = 0.0) -> PacResult:
    """Run the full pipeline. ``subsets`` replaces the random split when given."""
    X = as_dataset(data)
    if subsets is None:
        subsets = split_random(X.shape[0], config.n_threads, config.seed)
    par = parallel_phase(X, subsets, config)
    lam_g = config.lambda_g if config.lambda_g is not None else lambda_g_from_epsilon(config.epsilon, X.shape[0], len(par.atoms))
    return group_and_refine(X, par, lam_g, config, audit=audit)

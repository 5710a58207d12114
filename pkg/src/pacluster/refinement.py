"""Point-level correction of a grouped partition.

Each sweep looks for points whose move to another group lowers the energy,
then applies all of them at once. Two distance filters avoid most of the
delta evaluations: a per-pair radius ``gamma`` inside which no point can
profitably leave its group, and a whole-cluster version of the same test
using the cluster radius from the parallel step.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .core import ClusterSet, Partition, as_dataset
from .regkmeans import RegKmeansSettings

log = logging.getLogger(__name__)

AUDIT_REL_TOL = 1e-9


def solve_gamma(gi, gj, lam_r: float) -> Optional[float]:
    """Filter radius for moves from ``gi`` to ``gj``, or None if there is none.

    ``gi``/``gj`` need ``size`` and ``centroid``.
    """
    a, b = gi.size, gj.size
    if a < 2:
        return None
    diff = np.asarray(gj.centroid) - np.asarray(gi.centroid)
    D2 = float(diff @ diff)
    g = _gamma(a, b, D2, lam_r)
    return None if math.isnan(g) else g


def _gamma(a, b, D2, lam):
    L = lam / (a * a - a) - lam / (b * b + b) + b / (b + 1.0) * D2
    if not L > 0:
        return math.nan
    B = 2.0 * b / (b + 1.0) * math.sqrt(D2)
    A = (a + b) / ((a - 1.0) * (b + 1.0))
    # 2L / (B + sqrt(B^2 + 4AL)) is the positive root without cancellation
    return 2.0 * L / (B + math.sqrt(B * B + 4.0 * A * L))


def gamma_table(sizes: np.ndarray, cents: np.ndarray, lam: float) -> np.ndarray:
    """k x k matrix of filter radii, NaN where absent (diagonal, singleton source, L <= 0)."""
    a = sizes.astype(np.float64)[:, None]
    b = sizes.astype(np.float64)[None, :]
    D2 = ((cents[:, None, :] - cents[None, :, :]) ** 2).sum(axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        L = lam / (a * a - a) - lam / (b * b + b) + b / (b + 1.0) * D2
        B = 2.0 * b / (b + 1.0) * np.sqrt(D2)
        A = (a + b) / ((a - 1.0) * (b + 1.0))
        g = 2.0 * L / (B + np.sqrt(B * B + 4.0 * A * L))
    ok = (L > 0) & (a >= 2) & np.isfinite(g)
    np.fill_diagonal(ok, False)
    return np.where(ok, g, np.nan)


def omega_guard(lambda_c: float, lambda_g: float, min_cluster_size: int) -> bool:
    """True when refinement provably cannot profit from opening a new cluster."""
    if lambda_c >= lambda_g:
        return False
    omega = lambda_c / lambda_g
    return (1.0 - omega) * min_cluster_size - 2.0 * math.sqrt(omega) >= 1.0


@dataclass
class RefineSweep:
    sweep: int
    energy: float
    relative_energy: float
    moved: int
    moved_fraction: float
    k: int
    skipped_by_cluster: int = 0
    skipped_by_point: int = 0
    evaluations: int = 0
    audit_checked: int = 0
    audit_violations: int = 0
    min_applied_delta: float = 0.0
    seconds: float = 0.0


@dataclass
class RefineResult:
    partition: Partition
    trace: list
    loose: np.ndarray = field(repr=False)
    tol: float = 0.0

    @property
    def labels(self) -> np.ndarray:
        return self.partition.labels

    @property
    def k(self) -> int:
        return self.partition.k

    @property
    def sweeps(self) -> int:
        return len(self.trace) - 1


def _compact(labels: np.ndarray) -> np.ndarray:
    _, inv = np.unique(labels, return_inverse=True)
    return inv.astype(np.int64)


def _group_stats(X, labels, k):
    sizes = np.bincount(labels, minlength=k).astype(np.float64)
    cents = np.empty((k, X.shape[1]))
    for t in range(X.shape[1]):
        cents[:, t] = np.bincount(labels, weights=X[:, t], minlength=k) / sizes
    return sizes, cents


def _energy(X, labels, k, lam):
    reg, fit = _kernels.weighted_energy(X, np.ones(X.shape[0]), labels, k, lam)
    return reg + fit


def _units(X, labels, k, atom_of, loose, atoms: ClusterSet):
    """Group points into scan units: surviving parts of parallel clusters, plus loose points."""
    n = X.shape[0]
    A = len(atoms)
    key = np.where(loose, A + np.arange(n), atom_of)
    order = np.lexsort((key, labels))
    ks = key[order]
    starts = np.flatnonzero(np.concatenate(([True], ks[1:] != ks[:-1])))
    unit_key = ks[starts]
    unit_group = labels[order[starts]]
    is_atom = unit_key < A
    cent = np.empty((starts.size, X.shape[1]))
    rho = np.zeros(starts.size)
    cent[is_atom] = atoms.centroids[unit_key[is_atom]]
    rho[is_atom] = atoms.radius[unit_key[is_atom]]
    cent[~is_atom] = X[unit_key[~is_atom] - A]
    pt_ptr = np.append(starts, n).astype(np.int64)
    grp_ptr = np.searchsorted(unit_group, np.arange(k + 1)).astype(np.int64)
    return grp_ptr, np.ascontiguousarray(cent), rho, pt_ptr, order.astype(np.int64), unit_key


def _audit(X, labels, sizes, cents, gamma, lam, unit_cent, unit_rho, unit_of_point, sample):
    """Recheck filtered (point, target) pairs with the full delta; return (checked, violations)."""
    checked = 0
    bad = 0
    k = sizes.shape[0]
    for p in sample:
        i = labels[p]
        a = sizes[i]
        x = X[p]
        di2 = float(((cents[i] - x) ** 2).sum())
        u = unit_of_point[p]
        dc = float(np.sqrt(((cents[i] - unit_cent[u]) ** 2).sum()))
        for j in range(k):
            g = gamma[i, j]
            if j == i or math.isnan(g):
                continue
            if not (dc + unit_rho[u] <= g or di2 <= g * g):
                continue
            b = sizes[j]
            dj2 = float(((cents[j] - x) ** 2).sum())
            terms = (lam / (a * (a - 1)), lam / (b * (b + 1)), b / (b + 1) * dj2, a / (a - 1) * di2)
            delta = terms[0] - terms[1] + terms[2] - terms[3]
            checked += 1
            if delta < -AUDIT_REL_TOL * sum(terms):
                bad += 1
    return checked, bad


def refine(
    data,
    point_groups,
    atoms: ClusterSet,
    lam_r: float,
    settings: RegKmeansSettings,
    *,
    workers: int = 1,
    audit: float = 0.0,
    seed: int = 0,
) -> RefineResult:
    """Refine the point-to-group labels ``point_groups``.

    ``atoms`` is the parallel step's output; its clusters must each lie
    inside a single group. A point that moves is tracked as a loose point
    from then on. ``audit`` is the fraction of points per sweep whose
    filtered targets get rechecked with the full delta.
    """
    X = as_dataset(data)
    n = X.shape[0]
    labels = _compact(np.asarray(point_groups))
    atom_of = np.asarray(atoms.labels, dtype=np.int64)
    loose = np.zeros(n, dtype=bool)
    rng = np.random.default_rng(seed)

    k = int(labels.max()) + 1
    e0 = _energy(X, labels, k, lam_r)
    tol = settings.resolve_tol(e0)
    trace = [RefineSweep(0, e0, 1.0, 0, 0.0, k)]
    e_prev = e0
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for s in range(1, settings.iter_max + 1):
            t0 = time.perf_counter()
            sizes, cents = _group_stats(X, labels, k)
            gamma = gamma_table(sizes, cents, lam_r)
            grp_ptr, ucent, urho, pt_ptr, pts, _ = _units(X, labels, k, atom_of, loose, atoms)
            best_j = np.full(n, -1, dtype=np.int64)
            best_d = np.zeros(n)
            args = (X, cents, sizes, gamma, float(lam_r), grp_ptr, ucent, urho, pt_ptr, pts)
            if pool is None or k == 1:
                sk1, sk2, ev = _kernels.refine_scan(*args, 0, k, best_j, best_d)
            else:
                bounds = np.linspace(0, k, min(workers, k) + 1).astype(int)
                futs = [
                    pool.submit(_kernels.refine_scan, *args, int(g0), int(g1), best_j, best_d)
                    for g0, g1 in zip(bounds[:-1], bounds[1:])
                ]
                counts = np.array([f.result() for f in futs])
                sk1, sk2, ev = (int(v) for v in counts.sum(axis=0))

            checked = bad = 0
            if audit > 0:
                m = max(1, int(round(audit * n)))
                sample = rng.choice(n, size=min(m, n), replace=False)
                unit_of_point = np.empty(n, dtype=np.int64)
                unit_of_point[pts] = np.repeat(np.arange(pt_ptr.size - 1), np.diff(pt_ptr))
                checked, bad = _audit(X, labels, sizes, cents, gamma, lam_r, ucent, urho, unit_of_point, sample)

            moved = best_j >= 0
            n_moved = int(moved.sum())
            min_delta = float(best_d[moved].min()) if n_moved else 0.0
            if n_moved:
                labels = labels.copy()
                labels[moved] = best_j[moved]
                loose |= moved
                labels = _compact(labels)
                k = int(labels.max()) + 1
            e = _energy(X, labels, k, lam_r)
            trace.append(
                RefineSweep(s, e, e / e0, n_moved, n_moved / n, k, int(sk1), int(sk2), int(ev),
                            checked, bad, min_delta, time.perf_counter() - t0)
            )
            if n_moved == 0 or abs(e_prev - e) < tol:
                break
            e_prev = e
    finally:
        if pool is not None:
            pool.shutdown()
    return RefineResult(Partition(labels, _data=X), trace, loose, tol)

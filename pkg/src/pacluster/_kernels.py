"""Compiled inner loops.

The regularized k-means kernel works on weighted points. Ordinary points
have weight 1; the grouping step passes cluster centroids weighted by
cluster size, which turns the same loop into the set variant.

All kernels release the GIL so the parallel phase can run them from a
thread pool on disjoint subsets.
"""

import math

import numpy as np
from numba import njit


@njit(nogil=True, cache=True, inline="always")
def _sqdist(a, b):
    s = 0.0
    for t in range(a.shape[0]):
        u = a[t] - b[t]
        s += u * u
    return s


@njit(nogil=True, cache=True)
def weighted_energy(X, w, labels, k, lam):
    """Return (regularization, fit) for a labelling with clusters 0..k-1."""
    n, d = X.shape
    sizes = np.zeros(k)
    sums = np.zeros((k, d))
    for p in range(n):
        g = labels[p]
        sizes[g] += w[p]
        for t in range(d):
            sums[g, t] += w[p] * X[p, t]
    reg = 0.0
    for g in range(k):
        reg += lam / sizes[g]
        for t in range(d):
            sums[g, t] /= sizes[g]
    fit = 0.0
    for p in range(n):
        fit += w[p] * _sqdist(sums[labels[p]], X[p])
    return reg, fit


@njit(nogil=True, cache=True)
def _restat(X, w, labels, k, sizes, sums, cents):
    n, d = X.shape
    sizes[:k] = 0.0
    sums[:k, :] = 0.0
    for p in range(n):
        g = labels[p]
        sizes[g] += w[p]
        for t in range(d):
            sums[g, t] += w[p] * X[p, t]
    for g in range(k):
        for t in range(d):
            cents[g, t] = sums[g, t] / sizes[g]


@njit(nogil=True, cache=True)
def rkm(X, w, lam, tol, iter_max):
    """Greedy regularized k-means with a merge scan after every sweep.

    Returns labels, k, number of sweeps and per-sweep traces (index 0 is the
    initial one-cluster state): recomputed energy, tracked energy (previous
    recomputed energy plus the accepted deltas), moves, merges, k.
    """
    n, d = X.shape
    cap = 2 * n + 1
    labels = np.zeros(n, np.int64)
    sizes = np.zeros(cap)
    sums = np.zeros((cap, d))
    cents = np.zeros((cap, d))
    alive = np.zeros(cap, np.bool_)
    mapping = np.empty(cap, np.int64)

    e_trace = np.zeros(iter_max + 1)
    t_trace = np.zeros(iter_max + 1)
    mv_trace = np.zeros(iter_max + 1, np.int64)
    mg_trace = np.zeros(iter_max + 1, np.int64)
    k_trace = np.zeros(iter_max + 1, np.int64)

    ns = 1
    alive[0] = True
    _restat(X, w, labels, 1, sizes, sums, cents)
    reg, fit = weighted_energy(X, w, labels, 1, lam)
    e_prev = reg + fit
    e_trace[0] = e_prev
    t_trace[0] = e_prev
    k_trace[0] = 1
    sweeps = 0

    for s in range(1, iter_max + 1):
        tracked = e_prev
        moves = 0
        for p in range(n):
            i = labels[p]
            m = w[p]
            a = sizes[i]
            x = X[p]
            single = a - m <= 0.0
            base = 0.0
            if not single:
                di = _sqdist(cents[i], x)
                base = lam * m / (a * (a - m)) - a * m / (a - m) * di
            best = 0.0
            bj = -1
            for j in range(ns):
                if j == i or not alive[j]:
                    continue
                b = sizes[j]
                dj = _sqdist(cents[j], x)
                if single:
                    # the point is the whole cluster: moving it is a merge
                    delta = a * b / (a + b) * dj + lam * (1.0 / (a + b) - 1.0 / a - 1.0 / b)
                else:
                    delta = base - lam * m / (b * (b + m)) + b * m / (b + m) * dj
                if delta < best:
                    best = delta
                    bj = j
            if not single:
                dn = base + lam / m
                if dn < best:
                    best = dn
                    bj = ns
            if bj < 0:
                continue
            if bj == ns:
                alive[ns] = True
                sizes[ns] = 0.0
                sums[ns, :] = 0.0
                ns += 1
            sizes[i] -= m
            if sizes[i] <= 0.0:
                alive[i] = False
                sizes[i] = 0.0
                sums[i, :] = 0.0
            else:
                for t in range(d):
                    sums[i, t] -= m * x[t]
                    cents[i, t] = sums[i, t] / sizes[i]
            sizes[bj] += m
            for t in range(d):
                sums[bj, t] += m * x[t]
                cents[bj, t] = sums[bj, t] / sizes[bj]
            labels[p] = bj
            tracked += best
            moves += 1

        merges = 0
        for j in range(ns):
            mapping[j] = j
        for i in range(ns):
            if not alive[i]:
                continue
            for j in range(i + 1, ns):
                if not alive[j]:
                    continue
                a = sizes[i]
                b = sizes[j]
                delta = a * b / (a + b) * _sqdist(cents[i], cents[j]) + lam * (
                    1.0 / (a + b) - 1.0 / a - 1.0 / b
                )
                if delta < 0.0:
                    sizes[i] = a + b
                    for t in range(d):
                        sums[i, t] += sums[j, t]
                        cents[i, t] = sums[i, t] / sizes[i]
                    alive[j] = False
                    mapping[j] = i
                    tracked += delta
                    merges += 1

        newid = np.full(ns, -1, np.int64)
        k = 0
        for j in range(ns):
            if alive[j]:
                newid[j] = k
                k += 1
        for p in range(n):
            labels[p] = newid[mapping[labels[p]]]
        alive[:ns] = False
        alive[:k] = True
        ns = k
        _restat(X, w, labels, k, sizes, sums, cents)
        reg, fit = weighted_energy(X, w, labels, k, lam)
        e = reg + fit

        e_trace[s] = e
        t_trace[s] = tracked
        mv_trace[s] = moves
        mg_trace[s] = merges
        k_trace[s] = k
        sweeps = s
        if abs(e_prev - e) < tol:
            break
        e_prev = e

    return (
        labels,
        ns,
        sweeps,
        e_trace[: sweeps + 1].copy(),
        t_trace[: sweeps + 1].copy(),
        mv_trace[: sweeps + 1].copy(),
        mg_trace[: sweeps + 1].copy(),
        k_trace[: sweeps + 1].copy(),
    )


@njit(nogil=True, cache=True)
def refine_scan(
    X, gcent, gsize, gamma, lam,
    grp_atom_ptr, atom_cent, atom_rho, atom_pt_ptr, atom_pts,
    g0, g1, best_j, best_delta,
):
    """Scan groups g0..g1-1 for profitable single-point moves.

    ``gamma[i, j]`` is NaN where no filter radius exists. Writes only to the
    entries of ``best_j``/``best_delta`` belonging to the scanned groups.
    Returns (points skipped by the cluster filter, points skipped by the
    point filter, delta evaluations).
    """
    k = gsize.shape[0]
    skip1 = 0
    skip2 = 0
    evals = 0
    for i in range(g0, g1):
        a = gsize[i]
        for j in range(k):
            if j == i:
                continue
            g = gamma[i, j]
            has = not math.isnan(g)
            g2 = g * g
            b = gsize[j]
            for at in range(grp_atom_ptr[i], grp_atom_ptr[i + 1]):
                lo = atom_pt_ptr[at]
                hi = atom_pt_ptr[at + 1]
                if has:
                    dc = math.sqrt(_sqdist(gcent[i], atom_cent[at]))
                    if dc + atom_rho[at] <= g:
                        skip1 += hi - lo
                        continue
                for q in range(lo, hi):
                    p = atom_pts[q]
                    di = _sqdist(gcent[i], X[p])
                    if has and di <= g2:
                        skip2 += 1
                        continue
                    dj = _sqdist(gcent[j], X[p])
                    if a <= 1.0:
                        delta = a * b / (a + b) * dj + lam * (1.0 / (a + b) - 1.0 / a - 1.0 / b)
                    else:
                        delta = (
                            lam / (a * (a - 1.0))
                            - lam / (b * (b + 1.0))
                            + b / (b + 1.0) * dj
                            - a / (a - 1.0) * di
                        )
                    evals += 1
                    if delta < best_delta[p]:
                        best_delta[p] = delta
                        best_j[p] = j
    return skip1, skip2, evals

"""Seeded synthetic datasets: Gaussian mixtures and concentric rings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from . import _rng
from .core import InvalidDataError


@dataclass
class Component:
    mean: np.ndarray
    cov: np.ndarray  # vector = diagonal covariance, matrix = full
    count: int


@dataclass
class MixtureSpec:
    components: list
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        comps = []
        for c in self.components:
            if not isinstance(c, Component):
                c = Component(**c) if isinstance(c, dict) else Component(*c)
            mean = np.asarray(c.mean, dtype=np.float64)
            cov = np.asarray(c.cov, dtype=np.float64)
            if cov.ndim == 0:
                cov = np.full(mean.shape, float(cov))
            if int(c.count) < 1:
                raise InvalidDataError("component counts must be >= 1")
            if cov.ndim == 1:
                if cov.shape != mean.shape or np.any(cov < 0):
                    raise InvalidDataError("diagonal covariance must be non-negative and match the mean")
            elif cov.ndim == 2:
                if cov.shape != (mean.size, mean.size) or not np.allclose(cov, cov.T):
                    raise InvalidDataError("covariance must be a symmetric d x d matrix")
                if np.linalg.eigvalsh(cov).min() < -1e-12 * max(1.0, np.abs(cov).max()):
                    raise InvalidDataError("covariance is not positive semi-definite")
            else:
                raise InvalidDataError("covariance must be a scalar, vector or matrix")
            comps.append(Component(mean, cov, int(c.count)))
        if len({c.mean.size for c in comps}) > 1:
            raise InvalidDataError("component means differ in dimension")
        self.components = comps

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureSpec":
        """Components take ``cov`` (scalar, diagonal or full) or an isotropic ``sigma``."""
        comps = []
        for c in d["components"]:
            cov = c["cov"] if "cov" in c else float(c["sigma"]) ** 2
            comps.append(Component(c["mean"], cov, c["count"]))
        return cls(comps, d.get("seed", 0), d.get("shuffle", True))


def gen_gaussian_mixture(spec: MixtureSpec, seed: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """Sample the mixture; returns (points, component index of each point)."""
    rng = _rng.stream(spec.seed if seed is None else seed, "generator")
    parts = []
    truth = []
    for i, c in enumerate(spec.components):
        if c.cov.ndim == 1:
            P = c.mean + rng.standard_normal((c.count, c.mean.size)) * np.sqrt(c.cov)
        else:
            P = rng.multivariate_normal(c.mean, c.cov, size=c.count, method="eigh")
        parts.append(P)
        truth.append(np.full(c.count, i, dtype=np.int64))
    X = np.concatenate(parts)
    y = np.concatenate(truth)
    if spec.shuffle:
        perm = rng.permutation(X.shape[0])
        X, y = X[perm], y[perm]
    return np.ascontiguousarray(X), y


@dataclass
class RingSpec:
    radii: Sequence[float]
    counts: Sequence[int]
    sigma: float = 0.1
    angle_range: tuple = (0.0, 2 * np.pi)
    polar: bool = True
    theta_scale: float = 1.0  # multiplies theta in polar output
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        self.radii = [float(r) for r in self.radii]
        self.counts = [int(c) for c in self.counts]
        if len(self.radii) != len(self.counts):
            raise InvalidDataError("one count per ring is required")
        if any(r <= 0 for r in self.radii) or any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise InvalidDataError("radii must be positive and strictly increasing")
        if self.sigma < 0:
            raise InvalidDataError("sigma must be non-negative")
        self.angle_range = tuple(float(a) for a in self.angle_range)

    @classmethod
    def from_dict(cls, d: dict) -> "RingSpec":
        keys = {"radii", "counts", "sigma", "angle_range", "polar", "theta_scale", "seed", "shuffle"}
        return cls(**{k: v for k, v in d.items() if k in keys})


def gen_concentric_rings(spec: RingSpec, seed: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """Sample noisy rings; returns (points, ring index of each point).

    Points are (r, theta * theta_scale) when ``spec.polar`` is set, otherwise
    Cartesian (x, y).
    """
    rng = _rng.stream(spec.seed if seed is None else seed, "generator")
    lo, hi = spec.angle_range
    rs, ths, truth = [], [], []
    for i, (R, n) in enumerate(zip(spec.radii, spec.counts)):
        th = rng.uniform(lo, hi, n)
        r = R + spec.sigma * rng.standard_normal(n) if spec.sigma > 0 else np.full(n, R)
        rs.append(r)
        ths.append(th)
        truth.append(np.full(n, i, dtype=np.int64))
    r = np.concatenate(rs)
    th = np.concatenate(ths)
    y = np.concatenate(truth)
    if spec.polar:
        X = np.column_stack([r, th * spec.theta_scale])
    else:
        X = np.column_stack([r * np.cos(th), r * np.sin(th)])
    if spec.shuffle:
        perm = rng.permutation(X.shape[0])
        X, y = X[perm], y[perm]
    return np.ascontiguousarray(X), y


def load_canonical(name: str) -> dict:
    """Shipped dataset definitions: 'fig2', 'rings', 'stream'."""
    text = resources.files("pacluster").joinpath(f"data/{name}.json").read_text()
    return json.loads(text)


def canonical_mixture(seed: int = 0, scale: float = 1.0) -> MixtureSpec:
    d = load_canonical("fig2")
    spec = MixtureSpec.from_dict(d)
    spec.seed = seed
    if scale != 1.0:
        for c in spec.components:
            c.count = max(1, int(round(c.count * scale)))
    return spec


def canonical_rings(seed: int = 0, scale: float = 1.0) -> RingSpec:
    spec = RingSpec.from_dict(load_canonical("rings"))
    spec.seed = seed
    if scale != 1.0:
        spec.counts = [max(1, int(round(c * scale))) for c in spec.counts]
    return spec


@dataclass
class StreamSchedule:
    """Per-step batch composition for the four-source drifting stream."""

    centers: dict
    sigma: float
    steps: list = field(default_factory=list)  # one {source: count} dict per step

    @classmethod
    def canonical(cls) -> "StreamSchedule":
        d = load_canonical("stream")
        return cls({k: np.asarray(v, dtype=np.float64) for k, v in d["centers"].items()}, float(d["sigma"]), d["steps"])

    def batches(self, seed: int = 0):
        """Yield (points, source labels) per step."""
        names = sorted(self.centers)
        for t, step in enumerate(self.steps):
            rng = _rng.stream(seed, "stream-batch", t)
            parts, labs = [], []
            for name in names:
                n = int(step.get(name, 0))
                if n:
                    parts.append(self.centers[name] + self.sigma * rng.standard_normal((n, self.centers[name].size)))
                    labs.append(np.full(n, names.index(name), dtype=np.int64))
            X = np.concatenate(parts)
            y = np.concatenate(labs)
            perm = rng.permutation(X.shape[0])
            yield np.ascontiguousarray(X[perm]), y[perm]

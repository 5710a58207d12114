"""Experiment runner: grids of configurations over reshuffled trials.

A scenario is a JSON object::

    {"name": "table1",
     "kind": "pac" | "stability" | "parallel",
     "generator": {"type": "rings" | "mixture", "canonical": true, "seed": 0},
     "config": {...PacConfig fields...},
     "grid": {"lambda_c": [1, 2]} or [{"lambda_c": 1, "epsilon": 1}, ...],
     "trials": 5, "seed": 0}

``kind`` picks what a trial runs: the full pipeline, the parallel step once
followed by grouping and refinement for every ``lambda_g`` in the grid, or
the parallel step alone (timing). The data is generated once; trial ``t``
reshuffles it with seed ``seed + t``.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import platform
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .core import InvalidDataError
from .datagen import (
    MixtureSpec,
    RingSpec,
    canonical_mixture,
    canonical_rings,
    gen_concentric_rings,
    gen_gaussian_mixture,
)
from .pipeline import PacConfig, PacResult, group_and_refine, pac_fit, parallel_phase, split_random

KINDS = ("pac", "stability", "parallel")
_CONFIG_FIELDS = set(PacConfig.__dataclass_fields__)


@dataclass
class Scenario:
    name: str
    kind: str = "pac"
    generator: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    grid: Union[dict, list] = field(default_factory=dict)
    trials: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidDataError(f"unknown scenario kind {self.kind!r}")
        if self.trials < 1:
            raise InvalidDataError("trials must be >= 1")
        keys = set(self.config)
        for row in self.rows():
            keys |= set(row)
        unknown = keys - _CONFIG_FIELDS
        if unknown:
            raise InvalidDataError(f"unknown config fields: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        known = {k: d[k] for k in ("name", "kind", "generator", "config", "grid", "trials", "seed") if k in d}
        return cls(**known)

    @classmethod
    def load(cls, path_or_name: Union[str, Path]) -> "Scenario":
        """Read a scenario file, or a built-in scenario by name."""
        p = Path(path_or_name)
        if p.exists():
            return cls.from_dict(json.loads(p.read_text()))
        ref = resources.files("pacluster").joinpath(f"data/scenarios/{path_or_name}.json")
        if not ref.is_file():
            raise FileNotFoundError(f"no scenario file or built-in scenario named {path_or_name!r}")
        return cls.from_dict(json.loads(ref.read_text()))

    def rows(self) -> list:
        if isinstance(self.grid, list):
            return [dict(r) for r in self.grid] or [{}]
        if not self.grid:
            return [{}]
        keys = list(self.grid)
        return [dict(zip(keys, vals)) for vals in itertools.product(*(self.grid[k] for k in keys))]


def make_data(gen: dict) -> np.ndarray:
    kind = gen.get("type", "mixture")
    seed = int(gen.get("seed", 0))
    scale = float(gen.get("scale", 1.0))
    if kind == "mixture":
        spec = canonical_mixture(seed, scale) if gen.get("canonical", "spec" not in gen) else MixtureSpec.from_dict(gen["spec"])
        X, _ = gen_gaussian_mixture(spec, seed)
    elif kind == "rings":
        spec = canonical_rings(seed, scale) if gen.get("canonical", "spec" not in gen) else RingSpec.from_dict(gen["spec"])
        X, _ = gen_concentric_rings(spec, seed)
    else:
        raise InvalidDataError(f"unknown generator type {kind!r}")
    return X


def _sweep_records(res: PacResult) -> list:
    return [
        {"sweep": s.sweep, "moved_fraction": s.moved_fraction, "relative_energy": s.relative_energy, "k": s.k}
        for s in res.refinement.trace[1:]
    ]


def trial_record(res: PacResult, seed: int) -> dict:
    return {
        "seed": seed,
        "k": res.k,
        "lambda_g": res.lambda_g,
        "parallel_clusters": len(res.parallel.atoms),
        "grouping_k": res.grouping.k,
        "refine_sweeps": res.refinement.sweeps,
        "seconds": {name: ph.seconds for name, ph in res.phases.items()},
        "refinement": _sweep_records(res),
    }


def _stats(vals) -> dict:
    a = np.asarray(vals, dtype=np.float64)
    return {"mean": float(a.mean()), "std": float(a.std())}


def aggregate(trials: list) -> dict:
    agg = {}
    for key in ("k", "parallel_clusters", "grouping_k", "refine_sweeps"):
        if trials and key in trials[0]:
            agg[key] = _stats([t[key] for t in trials])
    if trials and "seconds" in trials[0]:
        agg["seconds"] = {ph: _stats([t["seconds"][ph] for t in trials]) for ph in trials[0]["seconds"]}
    return agg


@dataclass
class BenchReport:
    scenario: dict
    rows: list  # {"config": {...}, "trials": [...], "aggregate": {...}}
    environment: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def table(self, *keys: str) -> list:
        """(config values..., mean k, std k) per row."""
        return [tuple(r["config"].get(k) for k in keys) + (r["aggregate"]["k"]["mean"], r["aggregate"]["k"]["std"]) for r in self.rows]


def _config(base: dict, row: dict, seed: int) -> PacConfig:
    merged = {**base, **row, "seed": seed}
    return PacConfig(**{k: v for k, v in merged.items() if k in _CONFIG_FIELDS})


def run_benchmark(scenario: Scenario, grid=None, trials: Optional[int] = None, data: Optional[np.ndarray] = None) -> BenchReport:
    """Run every grid row for every trial. ``grid``/``trials`` override the scenario's."""
    if grid is not None or trials is not None:
        scenario = replace(scenario, grid=scenario.grid if grid is None else grid, trials=scenario.trials if trials is None else trials)
    X = make_data(scenario.generator) if data is None else data
    rows = scenario.rows()
    seeds = [scenario.seed + t for t in range(scenario.trials)]
    out = []

    if scenario.kind == "stability":
        # one parallel step per (non-lambda_g config, trial), reused across the lambda_g values
        per_row = {i: [] for i in range(len(rows))}
        for seed in seeds:
            cache = {}
            for i, row in enumerate(rows):
                base_row = {k: v for k, v in row.items() if k != "lambda_g"}
                cfg = _config(scenario.config, base_row, seed)
                key = json.dumps(base_row, sort_keys=True)
                if key not in cache:
                    cache[key] = parallel_phase(X, split_random(X.shape[0], cfg.n_threads, seed), cfg)
                lam_g = float(row.get("lambda_g", scenario.config.get("lambda_g", math.nan)))
                if not lam_g > 0:
                    raise InvalidDataError("stability rows need a positive lambda_g")
                res = group_and_refine(X, cache[key], lam_g, cfg)
                per_row[i].append(trial_record(res, seed))
        for i, row in enumerate(rows):
            out.append({"config": row, "trials": per_row[i], "aggregate": aggregate(per_row[i])})
    else:
        for row in rows:
            recs = []
            for seed in seeds:
                cfg = _config(scenario.config, row, seed)
                if scenario.kind == "parallel":
                    par = parallel_phase(X, split_random(X.shape[0], cfg.n_threads, seed), cfg)
                    recs.append({"seed": seed, "parallel_clusters": len(par.atoms), "seconds": {"parallel": par.seconds}, "workers": cfg.pool_size()})
                else:
                    recs.append(trial_record(pac_fit(X, cfg), seed))
            out.append({"config": row, "trials": recs, "aggregate": aggregate(recs)})

    env = {"cpu_count": os.cpu_count(), "python": platform.python_version(), "n_points": int(X.shape[0]), "dim": int(X.shape[1])}
    return BenchReport(asdict(scenario), out, env)


def constant_k_intervals(lams, means, stds, k: float, max_std: float) -> list:
    """Maximal runs of consecutive grid values where mean k equals ``k`` and std < ``max_std``.

    Returns (lo, hi) pairs of lambda values; ``hi / lo`` is the span.
    """
    runs = []
    start = None
    for i, (m, s) in enumerate(zip(means, stds)):
        ok = m == k and s < max_std
        if ok and start is None:
            start = i
        if not ok and start is not None:
            runs.append((lams[start], lams[i - 1]))
            start = None
    if start is not None:
        runs.append((lams[start], lams[len(lams) - 1]))
    return runs

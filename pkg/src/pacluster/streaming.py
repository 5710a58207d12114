"""Clustering data that arrives in batches.

Only the new batch goes through the parallel step. Its clusters are appended
to everything collected so far, and grouping plus refinement then run over
the whole accumulated dataset. The clusters from earlier batches are kept
exactly as the parallel step produced them.
"""

from __future__ import annotations

import io
import json
import struct
import zlib
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import ClusterSet, InvalidDataError, PacError, as_dataset
from .pipeline import (
    PacConfig,
    PacResult,
    ParallelResult,
    group_and_refine,
    lambda_g_time,
    parallel_phase,
    split_random,
)

MAGIC = b"PACSTATE"
VERSION = 1
_HEAD = struct.Struct("<8sIQ")
_HEADER_KEYS = {"t", "first_batch_size", "parallel_energy", "lambda_history", "k_history", "config", "payload_len", "payload_crc32"}


class StateFormatError(PacError):
    pass


@dataclass
class StreamState:
    data: np.ndarray
    atoms: ClusterSet
    subsets: list = field(repr=False)
    first_batch_size: int
    t: int
    parallel_energy: float = 0.0
    lambda_history: list = field(default_factory=list)
    k_history: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, dim: int) -> "StreamState":
        atoms = ClusterSet(
            np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros((0, dim)),
            np.zeros(0), np.zeros(0), np.zeros(0, np.int64),
        )
        return cls(np.zeros((0, dim)), atoms, [], 0, 0)

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def stream_step(state: StreamState | None, batch, config: PacConfig, *, audit: float = 0.0) -> tuple[StreamState, PacResult]:
    """Fold one batch into the stream; returns the new state and this step's clustering."""
    B = as_dataset(batch)
    if state is None:
        state = StreamState.empty(B.shape[1])
    if state.t and B.shape[1] != state.dim:
        raise InvalidDataError(f"batch has dimension {B.shape[1]}, stream has {state.dim}")

    t = state.t + 1
    offset = state.data.shape[0]
    local = split_random(B.shape[0], config.n_threads, config.seed, step=t - 1)
    par_new = parallel_phase(B, local, config, thread_offset=config.n_threads * (t - 1))

    X = np.concatenate([state.data, B]) if offset else B
    new_atoms = par_new.atoms
    if len(state.atoms):
        atoms = ClusterSet.concat([state.atoms, new_atoms])
    else:
        atoms = new_atoms
    subsets = state.subsets + [idx + offset for idx in local]
    x1 = state.first_batch_size if state.t else B.shape[0]
    if config.lambda_g is not None:
        lam_g = config.lambda_g
    else:
        lam_g = lambda_g_time(config.epsilon, X.shape[0], len(atoms), x1, config.nu)

    par = ParallelResult(atoms, subsets, par_new.traces, state.parallel_energy + par_new.energy, par_new.seconds)
    result = group_and_refine(X, par, lam_g, config, audit=audit)

    new_state = replace(
        state,
        data=X,
        atoms=atoms,
        subsets=subsets,
        first_batch_size=x1,
        t=t,
        parallel_energy=par.energy,
        lambda_history=state.lambda_history + [lam_g],
        k_history=state.k_history + [result.k],
        config=asdict(config),
    )
    return new_state, result


def state_save(state: StreamState) -> bytes:
    sub_sizes = np.array([s.size for s in state.subsets], dtype=np.int64)
    sub_all = np.concatenate(state.subsets) if state.subsets else np.zeros(0, np.int64)
    buf = io.BytesIO()
    np.savez(
        buf,
        data=state.data,
        labels=state.atoms.labels,
        sizes=state.atoms.sizes,
        coord_sums=state.atoms.coord_sums,
        scatter=state.atoms.scatter,
        radius=state.atoms.radius,
        thread=state.atoms.thread,
        subset_sizes=sub_sizes,
        subsets=sub_all,
    )
    payload = buf.getvalue()
    header = json.dumps(
        {
            "t": state.t,
            "first_batch_size": state.first_batch_size,
            "parallel_energy": state.parallel_energy.hex(),
            "lambda_history": [float(v).hex() for v in state.lambda_history],
            "k_history": [int(v) for v in state.k_history],
            "config": state.config,
            "payload_len": len(payload),
            "payload_crc32": zlib.crc32(payload),
        }
    ).encode("utf-8")
    return _HEAD.pack(MAGIC, VERSION, len(header)) + header + payload


def state_load(blob: bytes) -> StreamState:
    if len(blob) < _HEAD.size:
        raise StateFormatError("state file is truncated")
    magic, version, hlen = _HEAD.unpack_from(blob)
    if magic != MAGIC:
        raise StateFormatError("not a stream state file (bad magic)")
    if version != VERSION:
        raise StateFormatError(f"unsupported state version {version}")
    try:
        header = json.loads(blob[_HEAD.size:_HEAD.size + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise StateFormatError("state header is corrupt") from exc
    if not isinstance(header, dict) or not _HEADER_KEYS <= set(header):
        raise StateFormatError("state header is incomplete")
    payload = blob[_HEAD.size + hlen:]
    if len(payload) != header["payload_len"] or zlib.crc32(payload) != header["payload_crc32"]:
        raise StateFormatError("state payload is truncated or corrupt")
    arrs = np.load(io.BytesIO(payload))
    atoms = ClusterSet(arrs["labels"], arrs["sizes"], arrs["coord_sums"], arrs["scatter"], arrs["radius"], arrs["thread"])
    bounds = np.cumsum(arrs["subset_sizes"])[:-1]
    subsets = list(np.split(arrs["subsets"], bounds)) if arrs["subset_sizes"].size else []
    return StreamState(
        data=arrs["data"],
        atoms=atoms,
        subsets=subsets,
        first_batch_size=header["first_batch_size"],
        t=header["t"],
        parallel_energy=float.fromhex(header["parallel_energy"]),
        lambda_history=[float.fromhex(v) for v in header["lambda_history"]],
        k_history=header["k_history"],
        config=header["config"],
    )

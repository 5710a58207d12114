"""Delimited text in and out, the JSON sidecar, and stdin batch framing."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Optional, Union

import numpy as np

from .core import InvalidDataError, NonFiniteError, as_dataset

PathOrStream = Union[str, Path, IO]


class DataFormatError(InvalidDataError):
    def __init__(self, msg: str, line: Optional[int] = None, source: str = "<input>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + msg)


def _split(line: str, comma: bool) -> list:
    return [c.strip() for c in line.split(",")] if comma else line.split()


def _is_numeric(cells) -> bool:
    try:
        for c in cells:
            float(c)
    except ValueError:
        return False
    return True


def parse_dataset(text: str, source: str = "<input>") -> np.ndarray:
    """Parse comma or whitespace separated rows; a non-numeric first row is a header."""
    rows = []
    dim = None
    comma = None
    first = True
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if comma is None:
            comma = "," in line
        cells = _split(line, comma)
        if first:
            first = False
            if not _is_numeric(cells):
                continue
        if dim is None:
            dim = len(cells)
        elif len(cells) != dim:
            raise DataFormatError(f"expected {dim} columns, found {len(cells)}", lineno, source)
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            bad = next(c for c in cells if not _is_numeric([c]))
            raise DataFormatError(f"non-numeric value {bad!r}", lineno, source) from None
        if not all(math.isfinite(v) for v in vals):
            raise NonFiniteError(f"{source}:{lineno}: NaN or infinite value")
        rows.append(vals)
    if not rows:
        raise DataFormatError("no data rows", None, source)
    return as_dataset(np.array(rows, dtype=np.float64))


def read_dataset(src: PathOrStream) -> np.ndarray:
    if hasattr(src, "read"):
        text = src.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        return parse_dataset(text, getattr(src, "name", "<stream>"))
    path = Path(src)
    return parse_dataset(path.read_text(encoding="utf-8"), str(path))


def format_rows(X: np.ndarray, labels: Optional[np.ndarray] = None) -> str:
    """One line per point, coordinates at 17 significant digits, label column last."""
    out = io.StringIO()
    for i, row in enumerate(X):
        cells = [format(float(v), ".17g") for v in row]
        if labels is not None:
            cells.append(str(int(labels[i])))
        out.write(",".join(cells))
        out.write("\n")
    return out.getvalue()


def _write_text(dst: PathOrStream, text: str) -> None:
    if hasattr(dst, "write"):
        dst.write(text)
    else:
        Path(dst).write_text(text, encoding="utf-8")


def write_dataset(dst: PathOrStream, X: np.ndarray) -> None:
    _write_text(dst, format_rows(X))


@dataclass
class LabeledOutput:
    data: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    clusters: list = field(default_factory=list)  # {id, size, centroid, variance}
    metadata: dict = field(default_factory=dict)

    @classmethod
    def build(cls, X: np.ndarray, labels: np.ndarray, metadata: Optional[dict] = None) -> "LabeledOutput":
        labels = np.asarray(labels, dtype=np.int64)
        k = int(labels.max()) + 1
        clusters = []
        for c in range(k):
            P = X[labels == c]
            cent = P.mean(axis=0)
            clusters.append(
                {
                    "id": c,
                    "size": int(P.shape[0]),
                    "centroid": [float(v) for v in cent],
                    "variance": float(((P - cent) ** 2).sum() / P.shape[0]),
                }
            )
        return cls(X, labels, clusters, dict(metadata or {}))

    def sidecar(self) -> dict:
        return {"k": len(self.clusters), "n_points": int(self.labels.size), "clusters": self.clusters, **self.metadata}


def sidecar_path(path: Union[str, Path]) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".json")


def write_labels(dst: PathOrStream, out: LabeledOutput, meta_path: Optional[Union[str, Path]] = None) -> None:
    """Write labeled rows to ``dst`` and the cluster table plus metadata as JSON.

    The JSON goes to ``meta_path``, or next to ``dst`` as ``<dst>.json`` when
    ``dst`` is a path.
    """
    _write_text(dst, format_rows(out.data, out.labels))
    if meta_path is None and not hasattr(dst, "write"):
        meta_path = sidecar_path(dst)
    if meta_path is not None:
        Path(meta_path).write_text(json.dumps(out.sidecar(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# Batches on stdin: an ASCII byte count, a newline, then that many bytes of CSV rows.

def frame_batch(text: Union[str, bytes]) -> bytes:
    body = text.encode("utf-8") if isinstance(text, str) else text
    return str(len(body)).encode("ascii") + b"\n" + body


def read_frame(stream: IO[bytes]) -> Optional[bytes]:
    """Read one framed block; None at a clean end of stream."""
    head = stream.readline()
    if not head:
        return None
    try:
        n = int(head.strip())
    except ValueError:
        raise DataFormatError(f"bad frame header {head[:40]!r}", None, "<stdin>") from None
    if n < 0:
        raise DataFormatError("negative frame length", None, "<stdin>")
    body = stream.read(n)
    if len(body) != n:
        raise DataFormatError(f"frame truncated: expected {n} bytes, got {len(body)}", None, "<stdin>")
    return body

"""Wire formats: dataset files and model checkpoints.

Floats are emitted with 17 significant digits, which round-trips IEEE
doubles bit-exactly, so re-serializing a loaded file reproduces it byte
for byte. Files are written atomically (temp file + rename).
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from typing import Iterable, List

import numpy as np

from .orbits import ShellConfig
from .topology import (
    NUM_FEATURES,
    GraphSnapshot,
    IslEdge,
    LinkBudget,
    build_plus_grid,
    replace,
)

__all__ = [
    "fmt_float",
    "dumps_17g",
    "atomic_write_text",
    "write_dataset",
    "read_dataset",
]

DATASET_SCHEMA = 1


def fmt_float(x: float) -> str:
    """17-significant-digit decimal form of a finite double."""
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    return format(float(x), ".17g")


def dumps_17g(obj) -> str:
    """JSON text with every float at 17 significant digits.

    The stdlib encoder pins floats to repr(), so this walks the structure
    itself. Dict insertion order is preserved, making output deterministic.
    """
    parts: List[str] = []
    _emit(obj, parts)
    return "".join(parts)


def _emit(obj, parts: List[str]) -> None:
    if obj is None or obj is True or obj is False:
        parts.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(fmt_float(float(obj)))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), parts)
    elif isinstance(obj, dict):
        parts.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                parts.append(", ")
            parts.append(json.dumps(str(k)))
            parts.append(": ")
            _emit(v, parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, v in enumerate(obj):
            if i:
                parts.append(", ")
            _emit(v, parts)
        parts.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def atomic_write_text(path: str, text: str) -> None:
    """Write-temp-then-rename so readers never see a partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _snapshot_line(snap: GraphSnapshot) -> dict:
    edges = [
        [e.u, e.v, e.kind, float(e.distance_km), float(e.spectral_efficiency), e.active]
        for e in snap.edges
    ]
    return {"t": float(snap.t), "nodes": snap.x, "edges": edges}


def write_dataset(
    path: str,
    snapshots: Iterable[GraphSnapshot],
    shell: ShellConfig,
    budget: LinkBudget,
    dt_s: float,
    buffer_pkts: float,
) -> None:
    """Emit header line plus one snapshot JSON object per line."""
    header = {
        "schema": DATASET_SCHEMA,
        "shell": shell.fingerprint(),
        "budget": budget.fingerprint(),
        "dt_s": float(dt_s),
        "buffer_B": float(buffer_pkts),
    }
    lines = [dumps_17g(header)]
    for snap in snapshots:
        lines.append(dumps_17g(_snapshot_line(snap)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


def read_dataset(path: str):
    """Parse a dataset file back into (snapshots, shell, budget, dt_s, B).

    The +Grid skeleton is rebuilt from the header shell and merged with
    the per-line distance/SE/active attributes positionally, relying on
    the canonical edge order.
    """
    with open(path) as fh:
        header_line = fh.readline()
        _require(bool(header_line), f"{path}: empty dataset file")
        header = json.loads(header_line)
        _require(header.get("schema") == DATASET_SCHEMA, f"{path}: unsupported schema")
        shell = ShellConfig(**header["shell"])
        budget = LinkBudget(**header["budget"])
        skeleton = build_plus_grid(shell)
        snapshots = []
        from .topology import F_MASK  # local import to avoid cycle noise

        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            x = np.asarray(obj["nodes"], dtype=float)
            _require(
                x.shape == (shell.num_sats, NUM_FEATURES),
                f"{path}: bad node matrix shape {x.shape}",
            )
            raw_edges = obj["edges"]
            _require(
                len(raw_edges) == len(skeleton),
                f"{path}: edge count {len(raw_edges)} != skeleton {len(skeleton)}",
            )
            edges = []
            for base, (u, v, kind, dist, se, active) in zip(skeleton, raw_edges):
                _require(
                    base.u == u and base.v == v and base.kind == kind,
                    f"{path}: edge ({u},{v},{kind}) out of canonical order",
                )
                edges.append(
                    replace(base, distance_km=dist, spectral_efficiency=se, active=active)
                )
            mask = x[:, F_MASK] == 1.0
            snapshots.append(GraphSnapshot(obj["t"], shell, x, tuple(edges), mask))
    return snapshots, shell, budget, header["dt_s"], header["buffer_B"]

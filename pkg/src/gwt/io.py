"""Snapshot files and CSV tables.

Snapshot layout (all little-endian)::

    magic    8 bytes   b"GWTSNAP\\0"
    version  uint32
    dim      uint32
    per axis float64 a, float64 b, uint64 N
    eps      float64
    t        float64
    samples  complex128 (float64 real/imag pairs), row-major, prod(N) values

A JSON sidecar ``<file>.json`` carries free-form metadata (model, scheme, ...).
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import GridField, UniformGrid

SNAP_MAGIC = b"GWTSNAP\0"
SNAP_VERSION = 1

ERROR_COLUMNS = ("eps", "dt", "deta", "scheme", "abs_error", "rel_error", "observed_order")
DIAGNOSTIC_COLUMNS = ("t", "norm", "boundary")


@dataclass(frozen=True)
class Snapshot:
    field: GridField
    eps: float
    t: float
    meta: dict = field(default_factory=dict)


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_snapshot(path: str | Path, fld: GridField, eps: float, t: float, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    g = fld.grid
    header = SNAP_MAGIC + struct.pack("<II", SNAP_VERSION, g.dim)
    for a, b, n in zip(g.lower, g.upper, g.counts):
        header += struct.pack("<ddQ", float(a), float(b), int(n))
    header += struct.pack("<dd", float(eps), float(t))
    data = np.ascontiguousarray(fld.values, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes(order="C"))
    sidecar = {"eps": float(eps), "t": float(t), "shape": list(g.shape)}
    sidecar.update(meta or {})
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path


def read_snapshot(path: str | Path) -> Snapshot:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != SNAP_MAGIC:
        raise ValueError(f"{path}: not a snapshot file (bad magic)")
    version, dim = struct.unpack_from("<II", raw, 8)
    if version != SNAP_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    off = 16
    lower, upper, counts = [], [], []
    for _ in range(dim):
        a, b, n = struct.unpack_from("<ddQ", raw, off)
        off += 24
        lower.append(a)
        upper.append(b)
        counts.append(n)
    eps, t = struct.unpack_from("<dd", raw, off)
    off += 16
    grid = UniformGrid(tuple(lower), tuple(upper), tuple(counts))
    expected = int(np.prod(counts)) * 16
    if len(raw) - off != expected:
        raise ValueError(f"{path}: expected {expected} data bytes, found {len(raw) - off}")
    values = np.frombuffer(raw, dtype="<c16", offset=off).reshape(grid.shape).astype(complex)
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
    return Snapshot(GridField(grid, values), eps, t, meta)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} entries, expected {len(columns)}")
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def observed_orders(steps: Sequence[float], errors: Sequence[float], rtol: float = 1e-9) -> list[float | None]:
    """``log2(e_i / e_{i+1})`` aligned with the finer entry; ``None`` where the mesh was not halved."""
    out: list[float | None] = [None]
    for i in range(1, len(errors)):
        halved = abs(steps[i - 1] / steps[i] - 2.0) <= rtol * 2.0
        ok = halved and errors[i - 1] > 0 and errors[i] > 0
        out.append(float(np.log2(errors[i - 1] / errors[i])) if ok else None)
    return out


def observable_columns(dim: int) -> list[str]:
    return (
        ["t"]
        + [f"x_{k}" for k in range(dim)]
        + ["mass"]
        + [f"x_raw_{k}" for k in range(dim)]
        + [f"q_{k}" for k in range(dim)]
    )

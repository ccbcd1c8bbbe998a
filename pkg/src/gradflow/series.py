"""Per-step series records and file output.

Series files are CSV with one header row and values printed with 17
significant digits (enough for bit-exact float round trips). Snapshots are
raw little-endian IEEE doubles, row-major, one file per field per time, with
a text sidecar carrying the grid metadata.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


@dataclass
class SeriesRecord:
    step: int
    time: float
    energy_total: float
    energy_quadratic: float
    energy_potential: float
    eta: float
    branch: str
    solver_iters: int
    mass: tuple
    extra: dict = dc_field(default_factory=dict)


def record_from_diagnostics(diag, breakdown=None, extra=None):
    merged = {"baseline_energy": diag.baseline_energy,
              "residual": diag.residual}
    merged.update(diag.extra)
    merged.pop("roots", None)
    if extra:
        merged.update(extra)
    return SeriesRecord(
        step=diag.step_index + 1, time=diag.time,
        energy_total=diag.e_after,
        energy_quadratic=float("nan") if breakdown is None else breakdown.quadratic,
        energy_potential=float("nan") if breakdown is None else breakdown.potential,
        eta=diag.eta, branch=diag.branch, solver_iters=diag.iterations,
        mass=diag.mass, extra=merged)


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.17g}"


def series_header(n_fields, extra_keys=()):
    cols = ["step", "time", "energy_total", "energy_quadratic",
            "energy_potential", "eta", "branch", "solver_iters"]
    if n_fields == 1:
        cols.append("mass")
    else:
        cols.extend(f"mass_{i + 1}" for i in range(n_fields))
    cols.extend(extra_keys)
    return cols


def write_series(path, records, n_fields, extra_keys=()):
    """Write a series CSV; an empty record list yields a header-only file."""
    path = Path(path)
    header = series_header(n_fields, extra_keys)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in records:
            row = [rec.step, _fmt(rec.time), _fmt(rec.energy_total),
                   _fmt(rec.energy_quadratic), _fmt(rec.energy_potential),
                   _fmt(rec.eta), rec.branch, rec.solver_iters]
            row.extend(_fmt(m) for m in rec.mass)
            row.extend(_fmt(rec.extra.get(k, float("nan")))
                       for k in extra_keys)
            writer.writerow(row)
    return path


def snapshot_paths(directory, field_name, step):
    base = Path(directory) / f"snapshot_{field_name}_{step:06d}"
    return base.with_suffix(".f64"), base.with_suffix(".meta")


def write_snapshot(directory, grid, values, *, field_name, step, time,
                   model_kind):
    """Raw float64 little-endian dump plus a text metadata sidecar."""
    data_path, meta_path = snapshot_paths(directory, field_name, step)
    data_path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(np.asarray(values), dtype="<f8")
    data_path.write_bytes(arr.tobytes())
    lines = [
        f"schema_version={SCHEMA_VERSION}",
        f"model={model_kind}",
        f"field={field_name}",
        f"step={step}",
        f"time={time:.17g}",
        f"dims={grid.dims}",
        "n=" + " ".join(str(m) for m in grid.n),
        "length=" + " ".join(f"{L:.17g}" for L in grid.length),
        "dtype=float64-le",
        "order=row-major",
    ]
    meta_path.write_text("\n".join(lines) + "\n")
    return data_path, meta_path


def read_snapshot(data_path):
    """Read a snapshot back; returns (array, metadata dict)."""
    data_path = Path(data_path)
    meta_path = data_path.with_suffix(".meta")
    meta = {}
    for line in meta_path.read_text().splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            meta[key] = value
    shape = tuple(int(v) for v in meta["n"].split())
    arr = np.frombuffer(data_path.read_bytes(), dtype="<f8").reshape(shape)
    return arr.copy(), meta

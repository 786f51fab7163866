"""File formats: grid functions (JSON header + raw float64 or CSV) and JSON reports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .grid import Grid, GridFunction

__all__ = ["save_grid_function", "load_grid_function", "to_jsonable", "dump_json", "write_csv"]


def _header(grid: Grid, fmt: str) -> dict[str, Any]:
    return {"n": grid.n, "lo": list(grid.box.lo), "L": grid.box.L, "N": grid.N, "format": fmt}


def save_grid_function(f: GridFunction, path: str | Path, fmt: str = "bin") -> Path:
    """Write ``<path>.json`` (header) and ``<path>.bin`` or ``<path>.csv``.

    ``bin`` is little-endian float64 in C order; ``csv`` rows are
    ``index,value`` with ``repr`` floats.  Both round-trip bit-exactly.
    """
    path = Path(path)
    if fmt not in ("bin", "csv"):
        raise ValueError(f"format must be 'bin' or 'csv', got {fmt!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    head = path.with_suffix(".json")
    head.write_text(json.dumps(_header(f.grid, fmt), sort_keys=True) + "\n")
    flat = np.ravel(f.values)
    if fmt == "bin":
        path.with_suffix(".bin").write_bytes(flat.astype("<f8").tobytes())
    else:
        with open(path.with_suffix(".csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "value"])
            for i, v in enumerate(flat.tolist()):
                w.writerow([i, repr(v)])
    return head


def load_grid_function(path: str | Path) -> GridFunction:
    head = Path(path).with_suffix(".json")
    meta = json.loads(head.read_text())
    grid = Grid.make(int(meta["n"]), tuple(meta["lo"]), float(meta["L"]), int(meta["N"]))
    if meta.get("format", "bin") == "bin":
        vals = np.frombuffer(head.with_suffix(".bin").read_bytes(), dtype="<f8").astype(float)
    else:
        with open(head.with_suffix(".csv"), newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        vals = np.empty(len(rows))
        for i, v in rows:
            vals[int(i)] = float(v)
    return GridFunction(grid, vals.reshape(grid.shape))


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types; non-finite floats become the strings ``"inf"``,
    ``"-inf"`` and ``"nan"``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def dump_json(obj: Any, path: str | Path) -> None:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    Path(path).write_text(json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n")


def write_csv(path: str | Path, header: list[str], rows: list[list[Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in to_jsonable(r)])

"""
CSV and JSON serialization of panels, weights and parameters.

Floats are written with ``repr``, the shortest decimal string that reads
back to the same double.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import ModelParams, Panel, PanelKind, WeightMatrix, as_matrix

__all__ = [
    "fmt",
    "read_edge_list",
    "read_panel_csv",
    "read_params_json",
    "read_weights_csv",
    "write_edge_list",
    "write_json",
    "write_panel_csv",
    "write_params_json",
    "write_weights_csv",
]


def fmt(x) -> str:
    return repr(float(x))


def _read_table(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    width = len(header)
    data = np.empty((len(body), width))
    for k, row in enumerate(body, start=2):
        if len(row) != width:
            raise ValueError(f"{path}: line {k} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                data[k - 2, j] = float(cell)
            except ValueError:
                raise ValueError(f"{path}: non-numeric cell {cell!r} at line {k}, column {j + 1}") from None
    if np.any(np.isnan(data)):
        r, c = np.argwhere(np.isnan(data))[0]
        raise ValueError(f"{path}: NaN at line {r + 2}, column {c + 1}")
    return header, data


def read_panel_csv(path, kind: PanelKind = PanelKind.RETURNS) -> Panel:
    """Header of node names, one row per time point."""
    header, data = _read_table(path)
    return Panel(data.T, kind, tuple(header))


def write_panel_csv(panel: Panel, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(panel.column_names())
        for row in panel.values.T:
            w.writerow([fmt(v) for v in row])


def read_weights_csv(path, row_standardized: bool | None = None) -> WeightMatrix:
    _, data = _read_table(path)
    if row_standardized is None:
        sums = data.sum(axis=1)
        row_standardized = bool(np.all((np.abs(sums - 1) < 1e-12) | (sums == 0)))
    return WeightMatrix(data, row_standardized=row_standardized)


def write_weights_csv(w, path) -> None:
    m = as_matrix(w)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow([f"node_{i + 1}" for i in range(m.shape[0])])
        for row in m:
            out.writerow([fmt(v) for v in row])


def write_edge_list(w, path) -> None:
    """Nonzero entries as ``i,j,w`` lines, 1-based node indices."""
    m = as_matrix(w)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["i", "j", "w"])
        for i, j in zip(*np.nonzero(m)):
            out.writerow([i + 1, j + 1, fmt(m[i, j])])


def read_edge_list(path, n: int) -> WeightMatrix:
    m = np.zeros((n, n))
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    for row in rows[1:]:
        if row:
            m[int(row[0]) - 1, int(row[1]) - 1] = float(row[2])
    return WeightMatrix(m)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_params_json(path) -> ModelParams:
    return ModelParams.from_dict(json.loads(Path(path).read_text()))


def write_params_json(p: ModelParams, path) -> None:
    write_json(p.to_dict(), path)

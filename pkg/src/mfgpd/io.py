"""CSV and JSON persistence for flows, occupations, certificates and policies.

Layouts (one header row, full float precision):

* flow        ``node, i0[, i1], x0[, x1], mass``
* occupation  ``slab, i0[, i1], a, mass`` plus a flow-style file for nu
* psi         ``node, i0[, i1], value``
* policy      ``slab, i0[, i1], a, prob``
* value       ``node, i0[, i1], value`` and feedback ``slab, i0[, i1], action, unique``
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .measures import DualCertificate, MeanFieldFlow, OccupationMeasure, Policy

FMT = "%.17g"


def _index_cols(grid):
    return [f"i{d}" for d in range(grid.state_dim)]


def _multi(grid):
    return np.stack(grid.multi_index(np.arange(grid.n_nodes)), axis=1)


def _write(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([FMT % v if isinstance(v, float) else v for v in row])
    return path


def _read(path, required):
    """Rows of a CSV as a dict of columns; raises ValueError naming the bad line."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise ValueError(f"{path}: line 1: missing columns {missing}")
        cols = {h: [] for h in header}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            for h, v in zip(header, row):
                try:
                    cols[h].append(float(v))
                except ValueError:
                    raise ValueError(f"{path}: line {lineno}: field {h!r} is not a number: {v!r}") from None
    return {h: np.asarray(v) for h, v in cols.items()}


def _flat(cols, grid, path):
    idx = tuple(cols[c].astype(np.int64) for c in _index_cols(grid))
    for d, (i, n) in enumerate(zip(idx, grid.n_state)):
        if i.size and (i.min() < 0 or i.max() >= n):
            raise ValueError(f"{path}: index column i{d} out of range [0, {n})")
    return np.ravel_multi_index(idx, grid.n_state)


def _node_table(path, grid, rows_per_node, value_col, first):
    cols = _read(path, [first, *_index_cols(grid), value_col])
    k = cols[first].astype(np.int64)
    if k.size and (k.min() < 0 or k.max() >= rows_per_node):
        raise ValueError(f"{path}: column {first!r} out of range [0, {rows_per_node})")
    out = np.zeros((rows_per_node, grid.n_nodes))
    seen = np.zeros_like(out, dtype=bool)
    flat = _flat(cols, grid, path)
    out[k, flat] = cols[value_col]
    seen[k, flat] = True
    if not seen.all():
        raise ValueError(f"{path}: {int((~seen).sum())} (row, node) entries missing")
    return out


def write_flow(path, flow: MeanFieldFlow, grid):
    idx, x = _multi(grid), grid.nodes
    rows = (
        [k, *idx[n].tolist(), *map(float, x[n]), float(flow.m[k, n])]
        for k in range(flow.m.shape[0])
        for n in range(grid.n_nodes)
    )
    header = ["node", *_index_cols(grid), *[f"x{d}" for d in range(grid.state_dim)], "mass"]
    return _write(path, header, rows)


def read_flow(path, grid) -> MeanFieldFlow:
    return MeanFieldFlow(_node_table(path, grid, grid.n_time + 1, "mass", "node"))


def write_psi(path, psi: DualCertificate, grid):
    idx = _multi(grid)
    rows = ([k, *idx[n].tolist(), float(psi.psi[k, n])] for k in range(psi.psi.shape[0]) for n in range(grid.n_nodes))
    return _write(path, ["node", *_index_cols(grid), "value"], rows)


def read_psi(path, grid) -> DualCertificate:
    return DualCertificate(_node_table(path, grid, grid.n_time + 1, "value", "node"))


def _write_slab_action(path, arr, grid, col):
    idx = _multi(grid)
    K, N, J = arr.shape
    rows = ([k, *idx[n].tolist(), j, float(arr[k, n, j])] for k in range(K) for n in range(N) for j in range(J))
    return _write(path, ["slab", *_index_cols(grid), "a", col], rows)


def _read_slab_action(path, grid, col):
    cols = _read(path, ["slab", *_index_cols(grid), "a", col])
    k, j = cols["slab"].astype(np.int64), cols["a"].astype(np.int64)
    if k.size and (k.min() < 0 or k.max() >= grid.n_time or j.min() < 0 or j.max() >= grid.n_actions):
        raise ValueError(f"{path}: slab or action index out of range")
    out = np.zeros((grid.n_time, grid.n_nodes, grid.n_actions))
    out[k, _flat(cols, grid, path), j] = cols[col]
    return out


def write_occupation(path, occ: OccupationMeasure, grid, nu_path=None):
    """Write xi; nu goes to ``nu_path`` (default: ``<stem>_nu.csv``) in the flow layout."""
    path = Path(path)
    nu_path = Path(nu_path) if nu_path else path.with_name(path.stem + "_nu.csv")
    _write_slab_action(path, occ.xi, grid, "mass")
    idx = _multi(grid)
    _write(nu_path, ["node", *_index_cols(grid), "mass"], ([0, *idx[n].tolist(), float(occ.nu[n])] for n in range(grid.n_nodes)))
    return path, nu_path


def read_occupation(path, grid, nu_path=None) -> OccupationMeasure:
    path = Path(path)
    nu_path = Path(nu_path) if nu_path else path.with_name(path.stem + "_nu.csv")
    xi = _read_slab_action(path, grid, "mass")
    nu = _node_table(nu_path, grid, 1, "mass", "node")[0]
    return OccupationMeasure(xi, nu)


def write_policy(path, policy: Policy, grid):
    return _write_slab_action(path, policy.kernel, grid, "prob")


def read_policy(path, grid) -> Policy:
    kernel = _read_slab_action(path, grid, "prob")
    return Policy(kernel, np.zeros(kernel.shape[:2], dtype=bool))


def write_value(path, value, grid):
    """Value function V on nodes, plus ``<stem>_feedback.csv`` with the argmin and tie flag."""
    path = Path(path)
    idx = _multi(grid)
    _write(path, ["node", *_index_cols(grid), "value"],
           ([k, *idx[n].tolist(), float(value.V[k, n])] for k in range(value.V.shape[0]) for n in range(grid.n_nodes)))
    fb = path.with_name(path.stem + "_feedback.csv")
    _write(fb, ["slab", *_index_cols(grid), "action", "unique"],
           ([k, *idx[n].tolist(), int(value.feedback[k, n]), int(value.minimizer_unique[k, n])]
            for k in range(value.feedback.shape[0]) for n in range(grid.n_nodes)))
    return path, fb


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())

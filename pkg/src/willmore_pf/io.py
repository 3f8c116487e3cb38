"""Trace and snapshot files.

Trace CSV columns: ``n,t,energy,mean,step_l2,el_residual,inner_iters,converged``
(``converged`` is 1 or 0).  Snapshot CSV columns: ``x,v,mu`` in 1D,
``i,j,x,y,v,mu`` in 2D and ``i,j,k,x,y,z,v,mu`` in 3D, one row per cell in
row-major order.  Floats are written with ``repr``, the shortest string that
round-trips, so reading a file back gives bit-identical values.  Every file is
written to a temporary sibling first and then renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .grid import Grid
from .scheme import SchemeState, Trace, TraceRow

TRACE_HEADER = ["n", "t", "energy", "mean", "step_l2", "el_residual", "inner_iters", "converged"]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def write_trace(trace: Trace, path: str | Path) -> None:
    rows = (
        (r.n, r.t, r.energy, r.mean, r.step_l2, r.el_residual, r.inner_iters, bool(r.converged)) for r in trace.rows
    )
    atomic_write_text(path, _csv_text(TRACE_HEADER, rows))


def read_trace(path: str | Path, tol_grad: float = 1e-8, tau: float | None = None) -> Trace:
    """Read a trace CSV.

    ``tau`` defaults to the time of row ``n = 1`` minus that of row 0,
    ``E0`` and the conserved mean are taken from the first row.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != TRACE_HEADER:
        raise ValueError(f"{path}: unexpected trace header {header}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(TRACE_HEADER):
            raise ValueError(f"{path}:{lineno}: expected {len(TRACE_HEADER)} columns, got {len(rec)}")
        try:
            rows.append(
                TraceRow(
                    n=int(rec[0]),
                    t=float(rec[1]),
                    energy=float(rec[2]),
                    mean=float(rec[3]),
                    step_l2=float(rec[4]),
                    el_residual=float(rec[5]),
                    inner_iters=int(rec[6]),
                    converged=rec[7].strip() in ("1", "true", "True"),
                )
            )
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise ValueError(f"{path}: trace has no rows")
    if tau is None:
        if len(rows) < 2:
            raise ValueError(f"{path}: cannot infer tau from a single row")
        tau = (rows[1].t - rows[0].t) / (rows[1].n - rows[0].n)
    return Trace(tau=tau, E0=rows[0].energy, alpha=rows[0].mean, tol_grad=tol_grad, rows=rows)


def _axis_names(dim):
    return ["i", "j", "k"][:dim], ["x", "y", "z"][:dim]


def write_snapshot(grid: Grid, state: SchemeState, path: str | Path) -> None:
    idx_names, x_names = _axis_names(grid.dim)
    coords = [c.ravel() for c in grid.coordinates()]
    v = state.v.ravel()
    mu = state.mu.ravel()
    if grid.dim == 1:
        header = ["x", "v", "mu"]
        rows = zip(coords[0], v, mu)
    else:
        header = idx_names + x_names + ["v", "mu"]
        index = [a.ravel() for a in np.indices(grid.shape)]
        rows = zip(*index, *coords, v, mu)
    atomic_write_text(path, _csv_text(header, rows))


def read_snapshot(path: str | Path) -> tuple[Grid, np.ndarray, np.ndarray]:
    """Return ``(grid, v, mu)`` from a snapshot CSV.

    The grid is recovered from the cell centers: ``L = x_first + x_last``.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    dims = {3: 1, 6: 2, 8: 3}
    if header is None or len(header) not in dims:
        raise ValueError(f"{path}: unexpected snapshot header {header}")
    dim = dims[len(header)]
    idx_names, x_names = _axis_names(dim)
    expected = ["x", "v", "mu"] if dim == 1 else idx_names + x_names + ["v", "mu"]
    if header != expected:
        raise ValueError(f"{path}: unexpected snapshot header {header}")
    data = [rec for rec in reader if rec]
    if dim == 1:
        x = np.array([float(r[0]) for r in data])
        cells = (len(data),)
        lengths = (x[0] + x[-1],)
    else:
        idx = np.array([[int(r[a]) for a in range(dim)] for r in data])
        cells = tuple(int(c) for c in idx.max(axis=0) + 1)
        xs = np.array([[float(r[dim + a]) for a in range(dim)] for r in data])
        lengths = tuple(float(xs[:, a].min() + xs[:, a].max()) for a in range(dim))
    grid = Grid(cells, lengths)
    if len(data) != grid.size:
        raise ValueError(f"{path}: {len(data)} rows for a grid of {grid.size} cells")
    v = np.array([float(r[-2]) for r in data]).reshape(grid.shape)
    mu = np.array([float(r[-1]) for r in data]).reshape(grid.shape)
    return grid, v, mu


def write_summary(summary: dict, path: str | Path) -> None:
    """Flat key/value JSON summary."""
    def value(v):
        if isinstance(v, (str, int, bool)) or v is None:
            return v
        v = float(v)
        # JSON has no inf/nan literals
        return v if math.isfinite(v) else repr(v)

    flat = {k: value(v) for k, v in summary.items()}
    atomic_write_text(path, json.dumps(flat, indent=2, sort_keys=False) + "\n")

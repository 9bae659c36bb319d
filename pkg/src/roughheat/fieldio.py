"""Flat binary and CSV serialization for gridded fields.

One fixed little-endian header, then the field values row-major as
IEEE-754 doubles.  The header carries everything needed to rebuild the
context: Hurst index, grid extents and resolution, the stored array
shape (which for solution fields differs from the increment shape by
one time row), seed, and the mollification scale.

CSV files are for eyeballing and external plotting; values print with
repr-exact %.17g so reruns are byte-identical.
"""

from __future__ import annotations

import struct

import numpy as np

from .params import Grid, Hurst

_HEADER = struct.Struct("<dddQQQQQd")
# h, t_max, x_half_width, nt, nx, rows, cols, seed, eps


def write_field(path, values, grid, hurst, *, seed=0, eps=0.0):
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.ndim != 2:
        raise ValueError(f"expected a 2-D field, got shape {values.shape}")
    rows, cols = values.shape
    header = _HEADER.pack(
        hurst.h,
        grid.t_max,
        grid.x_half_width,
        grid.nt,
        grid.nx,
        rows,
        cols,
        int(seed),
        float(eps),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(values.tobytes())


def read_field(path):
    """Returns (values, meta) with meta holding grid, hurst, seed, eps."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError(f"truncated header in {path}")
        h, t_max, half, nt, nx, rows, cols, seed, eps = _HEADER.unpack(raw)
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(
            f"payload size {data.size} does not match header {rows}x{cols}"
        )
    meta = {
        "grid": Grid(t_max=t_max, x_half_width=half, nt=int(nt), nx=int(nx)),
        "hurst": Hurst(h),
        "seed": int(seed),
        "eps": float(eps),
    }
    return data.reshape(int(rows), int(cols)).copy(), meta


def format_float(v):
    return "%.17g" % v


def write_csv(path, values, grid, row_label="t", row_coords=None):
    """Tidy-ish matrix CSV: first column the row coordinate, then x columns."""
    values = np.asarray(values)
    if row_coords is None:
        row_coords = np.arange(values.shape[0]) * grid.dt
    cols = ["%s" % row_label] + [
        "x=" + format_float(x) for x in grid.x_nodes[: values.shape[1]]
    ]
    lines = [",".join(cols)]
    for coord, row in zip(row_coords, values):
        lines.append(
            ",".join([format_float(coord)] + [format_float(v) for v in row])
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_table_csv(path, columns):
    """CSV from an ordered dict of name -> sequence, floats repr-exact."""
    names = list(columns)
    series = [list(columns[n]) for n in names]
    n_rows = len(series[0]) if series else 0
    lines = [",".join(names)]
    for i in range(n_rows):
        cells = []
        for s in series:
            v = s[i]
            cells.append(format_float(v) if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

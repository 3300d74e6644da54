"""Plain-text CSV emission (header row, 12+ significant digits) and control CSV input."""

import csv
import io

import numpy as np

FLOAT_FMT = "{:.15g}"


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT.format(float(v))
    return str(v)


def write_rows(path_or_buf, header, rows):
    """Write ``rows`` under ``header``; ``path_or_buf`` is a path or a text stream."""
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    finally:
        if own:
            fh.close()


def to_text(header, rows):
    buf = io.StringIO()
    write_rows(buf, header, rows)
    return buf.getvalue()


def kernel_rows(kg):
    """``x_1[, x_2], value`` rows of a :class:`~fracshe.kernel.KernelGrid`."""
    g = kg.grid
    pts = g.mesh()
    vals = np.asarray(kg.values)
    header = [f"x_{i + 1}" for i in range(g.d)] + ["value"]
    flat = [p.ravel() for p in pts] + [vals.ravel()]
    return header, zip(*flat)


def trajectory_rows(field):
    """``step, t, x_1, value`` for a single trajectory (d = 1)."""
    g = field.grid
    v = np.asarray(field.values)
    steps = getattr(field, "steps", None) or range(v.shape[0])
    x = g.coords()
    rows = ((s, s * g.dt, x[j], v[i, j]) for i, s in enumerate(steps) for j in range(g.n))
    return ["step", "t", "x_1", "value"], rows


def summary_rows(field, site):
    """``replica, t, x, value`` at one site for every replica and recorded time."""
    g = field.grid
    v = np.asarray(field.values)
    if v.ndim == g.d + 1:
        v = v[None]
    steps = getattr(field, "steps", None) or range(v.shape[1])
    idx = g.site_index(site)
    x = g.coords()[idx[-1]]
    rows = ((r, s * g.dt, x, v[(r, i) + idx]) for r in range(v.shape[0])
            for i, s in enumerate(steps))
    return ["replica", "t", "x", "value"], rows


def control_rows(h):
    c = h.coeffs
    return ["time_cell", "mode_index", "coefficient"], (
        (k, m, c[k, m]) for k in range(c.shape[0]) for m in range(c.shape[1]))


def read_control(path, grid, mu, n_cells=None):
    """Read a control CSV (``time_cell,mode_index,coefficient``); missing entries are zero."""
    from .skeleton import ControlPath, mode_table
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    M = len(mode_table(grid, mu))
    cells = [int(r["time_cell"]) for r in rows]
    nc = n_cells or (max(cells) + 1 if cells else 1)
    c = np.zeros((nc, M))
    for r in rows:
        k, m = int(r["time_cell"]), int(r["mode_index"])
        if not (0 <= k < nc and 0 <= m < M):
            raise ValueError(f"control entry ({k}, {m}) outside {nc} cells x {M} modes")
        c[k, m] = float(r["coefficient"])
    return ControlPath(grid, mu, c)


PROBE_HEADER = ["eps", "lambda", "p_hat", "p_lo", "p_hi", "slope", "slope_lo", "slope_hi",
                "rate_star"]


def probe_rows(table):
    return PROBE_HEADER, ([row[k] for k in PROBE_HEADER] for row in table)

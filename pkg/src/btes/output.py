"""Deterministic file writers: CSV traces, heat maps (CSV / 16-bit PGM), SVG chart."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

FMT = "{:.12g}"


def _fmt(v) -> str:
    return FMT.format(float(v))


def _writer(path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def trace_header(nu: int) -> list[str]:
    return ["time_s", "u_W", "T_in_K", "T_out_K"] + [f"Q_B{j + 1}_W_per_m" for j in range(nu)]


def write_trace(path, times, u, T_in, T_out, Q, nu: int) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(trace_header(nu))
        for i in range(len(times)):
            w.writerow([_fmt(times[i]), _fmt(u[i]), _fmt(T_in[i]), _fmt(T_out[i])]
                       + [_fmt(q) for q in Q[i]])


def read_csv_table(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(c) if c != "" else np.nan for c in r] for r in body]) if body \
        else np.zeros((0, len(header)))
    return header, data


def write_heatmap_csv(path, grid) -> None:
    """One line per mesh row, south row first."""
    fh, w = _writer(path)
    with fh:
        for row in np.asarray(grid):
            w.writerow([_fmt(v) for v in row])


def pgm_bytes(grid, T_amb: float) -> bytes:
    """16-bit binary PGM, north row at the top, linear over [T_amb - 1, max + 1] K."""
    g = np.asarray(grid, float)
    lo = T_amb - 1.0
    hi = float(g.max()) + 1.0
    scaled = np.rint((g - lo) / (hi - lo) * 65535.0)
    px = np.clip(scaled, 0, 65535).astype(">u2")[::-1]
    ny, nx = g.shape
    return f"P5\n{nx} {ny}\n65535\n".encode("ascii") + px.tobytes()


def write_pgm(path, grid, T_amb: float) -> None:
    Path(path).write_bytes(pgm_bytes(grid, T_amb))


MPC_HEADER = ["time_s", "y_ref_W", "u_W", "T_in_K", "T_out_K", "kkt_residual", "solve_ms", "status"]


def write_mpc_trace(path, result, timing: bool = False) -> None:
    """Closed-loop trace; ``solve_ms`` stays empty unless ``timing`` (wall time varies run to run)."""
    fh, w = _writer(path)
    with fh:
        w.writerow(MPC_HEADER)
        for k in range(len(result.u)):
            w.writerow([_fmt(result.times[k]), _fmt(result.y_ref[k]), _fmt(result.u[k]),
                        _fmt(result.T_in[k]), _fmt(result.T_out[k]), "{:.3e}".format(result.kkt_residual[k]),
                        "{:.3f}".format(result.solve_ms[k]) if timing else "", result.status[k]])


def svg_chart(times, y_ref, u, width: int = 800, height: int = 300) -> str:
    """Two polylines (reference and delivered power) over time."""
    t = np.asarray(times, float) / 3600.0
    ys = np.concatenate([np.asarray(y_ref, float), np.asarray(u, float)])
    if len(t) == 0:
        t = np.zeros(1)
        ys = np.zeros(1)
        y_ref = u = np.zeros(1)
    pad = 30.0
    t0, t1 = float(t.min()), float(t.max())
    v0, v1 = float(ys.min()), float(ys.max())
    if t1 == t0:
        t1 = t0 + 1.0
    if v1 == v0:
        v1 = v0 + 1.0

    def pts(vals):
        px = pad + (t - t0) / (t1 - t0) * (width - 2 * pad)
        py = height - pad - (np.asarray(vals, float) - v0) / (v1 - v0) * (height - 2 * pad)
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))

    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<polyline fill="none" stroke="blue" stroke-width="1" points="{pts(y_ref)}"/>\n'
        f'<polyline fill="none" stroke="red" stroke-width="1" points="{pts(u)}"/>\n'
        "</svg>\n"
    )


def write_svg(path, times, y_ref, u) -> None:
    Path(path).write_text(svg_chart(times, y_ref, u))


def write_state(path, x, labels) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["index", "state", "value_K"])
        for i, (name, v) in enumerate(zip(labels, x)):
            w.writerow([i, name, repr(float(v))])


def read_state(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([float(r[2]) for r in rows])


def write_report(path, report: dict) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["metric", "value"])
        for k, v in report.items():
            w.writerow([k, _fmt(v) if isinstance(v, float) else v])

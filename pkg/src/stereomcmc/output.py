"""CSV trace files and a small deterministic SVG line plot."""

from __future__ import annotations

import csv
import math
from xml.sax.saxutils import escape

import numpy as np

from .trace import KIND_NAMES

TRACE_COLUMNS = ("epoch", "t", "x1", "latitude", "kind", "mu_norm", "sigma_trace", "x_norm")
PARAMS_COLUMNS = ("epoch", "mu_norm", "sigma_eig_min", "sigma_eig_mean", "sigma_eig_max", "h", "lambda_ref")
EVENTS_COLUMNS = ("t", "kind", "latitude")
NUMERIC_TRACE_COLUMNS = tuple(c for c in TRACE_COLUMNS if c != "kind")


def fmt(value):
    """Shortest round-trip text for a number; empty for None."""
    if value is None:
        return ""
    if isinstance(value, (str, bytes)):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return repr(v)


def write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def trace_rows(traces, history):
    """Rows of trace.csv; mu_norm and sigma_trace are those in force for the row's epoch."""
    for tr in traces:
        if tr.epoch < len(history):
            hp = history[tr.epoch]
            mu_norm = hp.mu_norm
            s_tr = float(np.trace(hp.precondition.sigma))
        else:
            mu_norm = s_tr = None
        x_norm = np.linalg.norm(tr.x, axis=1)
        for i in range(len(tr)):
            yield (tr.epoch, tr.t[i], tr.x[i, 0], tr.latitude[i], KIND_NAMES[int(tr.kind[i])],
                   mu_norm, s_tr, x_norm[i])


def params_rows(history):
    for hp in history:
        eig = hp.sigma_eigs()
        yield (hp.epoch, hp.mu_norm, eig.min(), eig.mean(), eig.max(), hp.h, hp.lambda_ref)


def event_rows(events):
    for ev in events:
        yield (ev.time, ev.kind, ev.z[-1])


def read_csv_column(path, column):
    """Return ``(t, values)`` of a numeric trace.csv column.

    Raises ``KeyError`` for an unknown column and ``ValueError`` for an empty file.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path} is empty") from None
        if column not in header:
            raise KeyError(column)
        if column == "kind":
            raise KeyError("kind is categorical and cannot be plotted")
        ci = header.index(column)
        ti = header.index("t") if "t" in header else None
        ts, vs = [], []
        for i, row in enumerate(reader):
            vs.append(float(row[ci]) if row[ci] != "" else math.nan)
            ts.append(float(row[ti]) if ti is not None else float(i))
    if not vs:
        raise ValueError(f"{path} has no data rows")
    return np.array(ts), np.array(vs)


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def _num(v):
    return f"{v:.4g}"


def svg_line_plot(t, y, title="", ylabel="", width=800, height=320, max_points=4000):
    """Self-contained SVG text of a line plot; identical input gives identical bytes.

    Long series are reduced to per-bucket min and max so spikes stay visible.
    NaN values break the line.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) == 0:
        raise ValueError("nothing to plot")
    finite = np.isfinite(y)
    if not finite.any():
        raise ValueError("no finite values to plot")
    if len(t) > max_points:
        n_b = max_points // 2
        edges = np.linspace(0, len(t), n_b + 1).astype(int)
        tt, yy = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            seg = y[a:b]
            ok = np.isfinite(seg)
            if not ok.any():
                tt.append(t[a])
                yy.append(math.nan)
                continue
            i_lo = a + int(np.nanargmin(seg))
            i_hi = a + int(np.nanargmax(seg))
            for i in sorted({i_lo, i_hi}):
                tt.append(t[i])
                yy.append(y[i])
        t, y = np.array(tt), np.array(yy)
        finite = np.isfinite(y)
    left, right, top, bottom = 70, 20, 30, 40
    pw, ph = width - left - right, height - top - bottom
    t_lo, t_hi = float(t.min()), float(t.max())
    y_lo, y_hi = float(y[finite].min()), float(y[finite].max())
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    if t_hi == t_lo:
        t_hi = t_lo + 1.0

    def sx(v):
        return left + (v - t_lo) / (t_hi - t_lo) * pw

    def sy(v):
        return top + (y_hi - v) / (y_hi - y_lo) * ph

    paths, cur = [], []
    for tv, yv in zip(t, y):
        if math.isfinite(yv):
            cur.append(f"{sx(tv):.2f},{sy(yv):.2f}")
        elif cur:
            paths.append(cur)
            cur = []
    if cur:
        paths.append(cur)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(y_lo, y_hi):
        yy = sy(v)
        out.append(f'<line x1="{left - 4}" y1="{yy:.2f}" x2="{left}" y2="{yy:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{yy + 4:.2f}" font-size="11" text-anchor="end">{_num(v)}</text>')
    for v in _ticks(t_lo, t_hi):
        xx = sx(v)
        out.append(f'<line x1="{xx:.2f}" y1="{top + ph}" x2="{xx:.2f}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{xx:.2f}" y="{top + ph + 16}" font-size="11" text-anchor="middle">{_num(v)}</text>')
    for pts in paths:
        out.append(f'<polyline fill="none" stroke="#1f4e9c" stroke-width="1" points="{" ".join(pts)}"/>')
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="18" font-size="13" text-anchor="middle">{escape(title)}</text>')
    if ylabel:
        out.append(f'<text x="14" y="{top + ph / 2:.1f}" font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(ylabel)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 6}" font-size="12" text-anchor="middle">t</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

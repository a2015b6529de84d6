"""Trace export: CSV per agent, SVG line plots, JSON reports."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .simulator import AgentTrace, SimTrace

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")


def _num(v) -> str:
    v = float(v)
    if np.isnan(v):
        return ""
    return repr(v)


def _names(prefix: str, k: int) -> list[str]:
    return [prefix] if k == 1 else [f"{prefix}{j + 1}" for j in range(k)]


def trace_header(at: AgentTrace) -> list[str]:
    n, p, q = at.x.shape[1], at.u.shape[1], at.y.shape[1]
    return (["t"] + [f"x{j + 1}" for j in range(n)] + _names("u", p) + _names("y", q)
            + _names("y_r", q) + ["omega1", "omega2", "alpha1", "alpha2", "mu", "gate", "mode"])


def trace_rows(at: AgentTrace):
    for t in range(at.x.shape[0]):
        yield ([str(t)] + [_num(v) for v in at.x[t]] + [_num(v) for v in at.u[t]]
               + [_num(v) for v in at.y[t]] + [_num(v) for v in at.y_r[t]]
               + [_num(v) for v in at.w[t]] + [_num(v) for v in at.alpha[t]]
               + [_num(at.mu[t]), str(int(at.gate[t])), str(int(at.mode[t]))])


def write_trace_csv(at: AgentTrace, path) -> None:
    """One row per step; missing values (alpha while waiting) are empty fields."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(at))
        w.writerows(trace_rows(at))


def svg_plot(series, title: str, ylabel: str, hlines=(), width: int = 720, height: int = 360) -> str:
    """A self-contained line chart.

    ``series`` is a list of ``(label, values)``; ``hlines`` are dashed
    horizontal guides such as input limits.  Axes scale to the data extrema.
    """
    left, right, top, bottom = 64, 120, 32, 40
    pw, ph = width - left - right, height - top - bottom
    n = max(len(v) for _, v in series)
    ys = np.concatenate([np.asarray(v, dtype=float) for _, v in series] + [np.asarray(hlines, dtype=float)])
    ys = ys[np.isfinite(ys)]
    lo, hi = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def px(t):
        return left + pw * t / max(n - 1, 1)

    def py(v):
        return top + ph * (hi - v) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        out.append(f'<line x1="{left - 4}" y1="{py(v):.2f}" x2="{left}" y2="{py(v):.2f}" stroke="#444"/>')
        out.append(f'<text x="{left - 6}" y="{py(v) + 4:.2f}" text-anchor="end">{v:.3g}</text>')
        t = (n - 1) * k / 4
        out.append(f'<text x="{px(t):.2f}" y="{top + ph + 16}" text-anchor="middle">{t:.0f}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 6}" text-anchor="middle">t</text>')
    out.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(ylabel)}</text>')
    for v in hlines:
        out.append(f'<line x1="{left}" y1="{py(v):.2f}" x2="{left + pw}" y2="{py(v):.2f}" '
                   f'stroke="#888" stroke-dasharray="6 4"/>')
    for k, (label, vals) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        vals = np.asarray(vals, dtype=float)
        pts = " ".join(f"{px(t):.2f},{py(v):.2f}" for t, v in enumerate(vals) if np.isfinite(v))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.3" points="{pts}"/>')
        ly = top + 14 + 16 * k
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 34}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_plots(trace: SimTrace, names, u_limits, out_dir) -> list[Path]:
    """``y.svg``, ``y_r.svg`` and ``u.svg`` (first output / input of each agent)."""
    out_dir = Path(out_dir)
    specs = [
        ("y.svg", "Agent outputs", "y", [(nm, at.y[:, 0]) for nm, at in zip(names, trace.agents)], ()),
        ("y_r.svg", "Reference outputs", "y_r", [(nm, at.y_r[:, 0]) for nm, at in zip(names, trace.agents)], ()),
        ("u.svg", "Control inputs", "u", [(nm, at.u[:, 0]) for nm, at in zip(names, trace.agents)], u_limits),
    ]
    paths = []
    for fname, title, ylabel, series, hl in specs:
        p = out_dir / fname
        p.write_text(svg_plot(series, title, ylabel, hl))
        paths.append(p)
    return paths


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

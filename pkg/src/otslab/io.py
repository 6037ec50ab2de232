"""Trace CSV files and standalone SVG plots."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .analysis import RunTrace

MAX_PLOT_POINTS = 4000
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939")


def write_trace_csv(trace: RunTrace, path: str | Path) -> None:
    """Columns ``t,action,B1..Bn``; row 0 is the initial state with an empty action."""
    labels = trace.labels
    n = trace.graph.n
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "action"] + [f"B{j + 1}" for j in range(n)])
        for t, row in enumerate(trace.states):
            action = labels[t - 1] if t else ""
            w.writerow([t, action] + [format(float(x), ".17g") for x in row])


@dataclass
class TraceTable:
    actions: list[str]
    states: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.actions)


def read_trace_csv(path: str | Path) -> TraceTable:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty trace file")
    header = rows[0]
    if header[:2] != ["t", "action"] or len(header) < 3:
        raise ValueError(f"{path}: expected header t,action,B1..Bn")
    n = len(header) - 2
    actions, states = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != n + 2:
            raise ValueError(f"{path}:{lineno}: expected {n + 2} fields, got {len(row)}")
        if int(row[0]) != lineno - 2:
            raise ValueError(f"{path}:{lineno}: time column out of sequence")
        if lineno > 2:
            actions.append(row[1])
        elif row[1]:
            raise ValueError(f"{path}:2: initial row must have an empty action")
        states.append([float(x) for x in row[2:]])
    return TraceTable(actions, np.array(states, dtype=float))


def _downsample(T: int, limit: int = MAX_PLOT_POINTS) -> np.ndarray:
    if T <= limit:
        return np.arange(T)
    return np.unique(np.linspace(0, T - 1, num=limit).astype(np.int64))


def _polyline(xs, ys, x0, y0, w, h, xmax, color, dash=False) -> str:
    px = x0 + xs / max(xmax, 1) * w
    py = y0 + h - np.clip(ys, 0, 1) * h
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
    extra = ' stroke-dasharray="4 3"' if dash else ""
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.2"{extra} points="{pts}"/>'


def render_svg(trace: RunTrace, title: str = "", show_influence: bool | None = None) -> str:
    """Line plot of every agent's opinion over time (plus influences for dynamic runs)."""
    if show_influence is None:
        show_influence = not trace.influence.is_static
    width, height, margin = 900, 420, 50
    pw, ph = width - 2 * margin - 90, height - 2 * margin
    T = trace.steps
    idx = _downsample(T + 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{margin}" y="{margin - 20}" font-size="14">{escape(title)}</text>',
        f'<rect x="{margin}" y="{margin}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = margin + ph - frac * ph
        parts.append(f'<line x1="{margin - 4}" y1="{y:.1f}" x2="{margin}" y2="{y:.1f}" stroke="#444"/>')
        parts.append(f'<text x="{margin - 8}" y="{y + 4:.1f}" text-anchor="end">{frac:g}</text>')
    parts.append(f'<text x="{margin}" y="{margin + ph + 18}">0</text>')
    parts.append(f'<text x="{margin + pw}" y="{margin + ph + 18}" text-anchor="end">t = {T}</text>')
    for j in range(trace.graph.n):
        color = PALETTE[j % len(PALETTE)]
        parts.append(_polyline(idx.astype(float), trace.states[idx, j], margin, margin, pw, ph, T, color))
        ly = margin + 14 * (j + 1)
        parts.append(f'<text x="{margin + pw + 12}" y="{ly}" fill="{color}">B{j + 1}</text>')
    if show_influence and T:
        widx = _downsample(T)
        labels = trace.graph.labels
        for c, k in enumerate(sorted(set(int(a) for a in trace.actions))):
            sel = widx[trace.actions[widx] == k]
            if len(sel) == 0:
                continue
            color = PALETTE[(trace.graph.n + c) % len(PALETTE)]
            parts.append(_polyline(sel + 1.0, trace.influences[sel], margin, margin, pw, ph, T, color, dash=True))
            ly = margin + 14 * (trace.graph.n + c + 1)
            parts.append(f'<text x="{margin + pw + 12}" y="{ly}" fill="{color}">I_{escape(labels[k])}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(trace: RunTrace, path: str | Path, title: str = "") -> None:
    Path(path).write_text(render_svg(trace, title), encoding="utf-8")

"""CSV and static SVG output for study results."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import CSV_HEADER, ErrorReport, fit_rate

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]
MARKERS = ["circle", "square", "diamond", "triangle"]


def write_csv(rows: list[ErrorReport], path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in rows:
                fh.write(r.csv_row() + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def series_key(r: ErrorReport) -> str:
    return f"k=({r.ko},{r.kb}) {r.stab}"


def group_series(rows: list[ErrorReport]) -> dict[str, list[ErrorReport]]:
    out: dict[str, list[ErrorReport]] = {}
    for r in rows:
        out.setdefault(series_key(r), []).append(r)
    return out


def abscissa(series: list[ErrorReport]) -> tuple[str, np.ndarray]:
    """h if it varies along the series, otherwise h_bnd."""
    h = np.array([r.h for r in series])
    if len(h) > 1 and h.max() / h.min() > 1.2:
        return "h", h
    return "h_bnd", np.array([r.h_bnd for r in series])


def _marker(kind: str, x: float, y: float, color: str) -> str:
    if kind == "circle":
        return f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3.50" fill="{color}"/>'
    if kind == "square":
        return f'<rect x="{x - 3.5:.2f}" y="{y - 3.5:.2f}" width="7.00" height="7.00" fill="{color}"/>'
    if kind == "diamond":
        pts = f"{x:.2f},{y - 4.5:.2f} {x + 4.5:.2f},{y:.2f} {x:.2f},{y + 4.5:.2f} {x - 4.5:.2f},{y:.2f}"
    else:
        pts = f"{x:.2f},{y - 4.5:.2f} {x + 4.5:.2f},{y + 3.5:.2f} {x - 4.5:.2f},{y + 3.5:.2f}"
    return f'<polygon points="{pts}" fill="{color}"/>'


def svg_loglog(series: dict[str, tuple[np.ndarray, np.ndarray]], title: str, xlabel: str, ylabel: str,
               width: int = 640, height: int = 440) -> str:
    """Log-log line plot; each series is annotated with its fitted slope."""
    left, right, top, bottom = 70, 210, 40, 50
    pw, ph = width - left - right, height - top - bottom
    xs = np.concatenate([s[0] for s in series.values()]) if series else np.array([1.0])
    ys = np.concatenate([s[1] for s in series.values()]) if series else np.array([1.0])
    ys = ys[ys > 0] if np.any(ys > 0) else np.array([1.0])
    x0, x1 = math.floor(np.log10(xs.min())), math.ceil(np.log10(xs.max()))
    y0, y1 = math.floor(np.log10(ys.min())), math.ceil(np.log10(ys.max()))
    x1, y1 = max(x1, x0 + 1), max(y1, y0 + 1)

    def px(x):
        return left + (math.log10(x) - x0) / (x1 - x0) * pw

    def py(y):
        return top + (y1 - math.log10(y)) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2:.2f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for e in range(x0, x1 + 1):
        x = px(10.0**e)
        out.append(f'<line x1="{x:.2f}" y1="{top}" x2="{x:.2f}" y2="{top + ph}" stroke="#dddddd"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 16}" text-anchor="middle">1e{e}</text>')
    for e in range(y0, y1 + 1):
        y = py(10.0**e)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end">1e{e}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 12}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.2f})">{ylabel}</text>')
    for i, (name, (x, y)) in enumerate(series.items()):
        color, mk = PALETTE[i % len(PALETTE)], MARKERS[i % len(MARKERS)]
        ok = y > 0
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out += [_marker(mk, px(a), py(b), color) for a, b in zip(x[ok], y[ok])]
        label = name
        if ok.sum() >= 2:
            label += f"  slope {fit_rate(x[ok], y[ok], min_points=2).slope:.2f}"
        ly = top + 14 + 18 * i
        out.append(_marker(mk, left + pw + 14, ly - 4, color))
        out.append(f'<text x="{left + pw + 24}" y="{ly:.2f}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_reports(rows: list[ErrorReport], out_dir, stem: str = "study") -> dict[str, Path]:
    """Write ``<stem>.csv`` plus one SVG per error quantity."""
    out_dir = Path(out_dir)
    paths = {"csv": write_csv(rows, out_dir / f"{stem}.csv")}
    groups = group_series(rows)
    for qty in ("err_bulk", "err_trace"):
        series = {}
        xlabel = "h"
        for name, s in groups.items():
            xlabel, x = abscissa(s)
            series[name] = (x, np.array([getattr(r, qty) for r in s]))
        p = out_dir / f"{stem}_{qty}.svg"
        try:
            p.write_text(svg_loglog(series, f"{stem}: {qty}", xlabel, qty))
        except OSError as exc:
            raise OSError(f"cannot write {p}: {exc}") from exc
        paths[qty] = p
    return paths

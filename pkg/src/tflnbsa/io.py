"""CSV and SVG output with stable, byte-reproducible formatting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "HEADERS",
    "Series",
    "fmt",
    "write_csv",
    "csv_text",
    "line_svg",
    "map_svg",
]

# column headers per table kind; part of the public output format
HEADERS = {
    "fig3a": ("w_nm", "he_nm", "xi"),
    "fig3b": ("gap_nm", "dn_TE", "dn_TM", "xi"),
    "fig4a": ("L_c_um", "P3_TE", "P4_TE", "P3_TM", "P4_TM", "zeta"),
    "fig4b": ("gap_nm", "delta"),
    "fig4c": ("L_c_um", "P3_TE", "P4_TE", "P3_TM", "P4_TM", "zeta"),
    "fig5a": ("Lc_um", "error"),
    "fig6c": ("NA", "eta_TE", "eta_TM"),
    "modes": ("mode", "n_eff", "polarization", "te_fraction", "symmetry"),
    "field": ("x_um", "y_um", "E_x", "E_y"),
    "table": ("gap_nm", "dn_TE", "dn_TM"),
}


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v + 0.0, ".10g")  # no "-0"


def csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(csv_text(header, rows))
    return path


# -- SVG --------------------------------------------------------------------

W, H = 640, 420
ML, MR, MT, MB = 72, 150, 36, 56
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass(frozen=True)
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    dashed: bool = False


def _n(v: float) -> str:
    return format(round(float(v), 2), ".2f")


def _ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi == lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step - 1e-9) * step
    out = []
    k = 0
    while first + k * step <= hi + 1e-9 * step:
        out.append(first + k * step)
        k += 1
    return out


def _range(vals) -> tuple:
    a = np.asarray(vals, dtype=float)
    a = a[np.isfinite(a)]
    if a.size == 0:
        raise ValueError("no finite data to plot")
    lo, hi = float(a.min()), float(a.max())
    if hi == lo:
        pad = abs(lo) * 0.05 or 1.0
        lo, hi = lo - pad, hi + pad
    return lo, hi


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


class _Frame:
    def __init__(self, xr, yr):
        self.x0, self.x1 = xr
        self.y0, self.y1 = yr

    def X(self, v):
        return ML + (float(v) - self.x0) / (self.x1 - self.x0) * (W - ML - MR)

    def Y(self, v):
        return H - MB - (float(v) - self.y0) / (self.y1 - self.y0) * (H - MT - MB)


def _axes(fr: _Frame, title: str, xlabel: str, ylabel: str) -> list:
    parts = [
        f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" height="{H - MT - MB}" fill="none" stroke="#000"/>',
        f'<text x="{_n((W - MR + ML) / 2)}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<text x="{_n((W - MR + ML) / 2)}" y="{H - 14}" text-anchor="middle" font-size="12">{_esc(xlabel)}</text>',
        f'<text x="16" y="{_n((H - MB + MT) / 2)}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {_n((H - MB + MT) / 2)})">{_esc(ylabel)}</text>',
    ]
    for t in _ticks(fr.x0, fr.x1):
        x = _n(fr.X(t))
        parts.append(f'<line x1="{x}" y1="{H - MB}" x2="{x}" y2="{H - MB + 5}" stroke="#000"/>')
        parts.append(f'<text x="{x}" y="{H - MB + 18}" text-anchor="middle" font-size="10">{format(t, ".4g")}</text>')
    for t in _ticks(fr.y0, fr.y1):
        y = _n(fr.Y(t))
        parts.append(f'<line x1="{ML - 5}" y1="{y}" x2="{ML}" y2="{y}" stroke="#000"/>')
        parts.append(f'<text x="{ML - 8}" y="{y}" text-anchor="end" dominant-baseline="middle" font-size="10">{format(t, ".4g")}</text>')
    return parts


def _doc(parts: list) -> str:
    head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">'
    return "\n".join([head, '<rect width="100%" height="100%" fill="#fff"/>', *parts, "</svg>", ""])


def line_svg(series: Sequence[Series], title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """Line plot with one ``<polyline>`` per series and a legend."""
    series = [s for s in series if len(s.x)]
    if not series:
        raise ValueError("nothing to plot")
    fr = _Frame(_range(np.concatenate([np.asarray(s.x, float) for s in series])),
                _range(np.concatenate([np.asarray(s.y, float) for s in series])))
    parts = _axes(fr, title, xlabel, ylabel)
    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_n(fr.X(x))},{_n(fr.Y(y))}" for x, y in zip(s.x, s.y) if math.isfinite(y))
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        ly = MT + 14 + 18 * k
        parts.append(f'<line x1="{W - MR + 12}" y1="{ly}" x2="{W - MR + 36}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash}/>')
        parts.append(f'<text x="{W - MR + 42}" y="{ly}" dominant-baseline="middle" font-size="11">{_esc(s.label)}</text>')
    return _doc(parts)


def _color(v: float, lo: float, hi: float) -> str:
    if not math.isfinite(v):
        return "#cccccc"
    s = 0.0 if hi == lo else (v - lo) / (hi - lo)
    # blue to white to red
    if s < 0.5:
        k = s / 0.5
        r, g, b = int(255 * k), int(255 * k), 255
    else:
        k = (s - 0.5) / 0.5
        r, g, b = 255, int(255 * (1 - k)), int(255 * (1 - k))
    return f"#{r:02x}{g:02x}{b:02x}"


def map_svg(xs, ys, z, contours=(), title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """Heat map of ``z[i, j]`` at ``(xs[i], ys[j])`` with contour polylines on top."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    z = np.asarray(z, float)
    if z.shape != (xs.size, ys.size) or z.size == 0:
        raise ValueError("grid shape does not match axes")

    def edges(v):
        if v.size == 1:
            return np.array([v[0] - 0.5, v[0] + 0.5])
        mid = (v[1:] + v[:-1]) / 2
        return np.concatenate([[2 * v[0] - mid[0]], mid, [2 * v[-1] - mid[-1]]])

    ex, ey = edges(xs), edges(ys)
    fr = _Frame((ex[0], ex[-1]), (ey[0], ey[-1]))
    finite = z[np.isfinite(z)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    parts = []
    for i in range(xs.size):
        for j in range(ys.size):
            x0, x1 = fr.X(ex[i]), fr.X(ex[i + 1])
            y0, y1 = fr.Y(ey[j + 1]), fr.Y(ey[j])
            parts.append(
                f'<rect x="{_n(x0)}" y="{_n(y0)}" width="{_n(x1 - x0)}" height="{_n(y1 - y0)}" '
                f'fill="{_color(z[i, j], lo, hi)}" stroke="none"/>'
            )
    parts += _axes(fr, title, xlabel, ylabel)
    for line in contours:
        pts = " ".join(f"{_n(fr.X(p[0]))},{_n(fr.Y(p[1]))}" for p in line)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#000" stroke-width="2"/>')
    parts.append(f'<text x="{W - MR + 12}" y="{MT + 14}" font-size="11">min {format(lo, ".4g")}</text>')
    parts.append(f'<text x="{W - MR + 12}" y="{MT + 30}" font-size="11">max {format(hi, ".4g")}</text>')
    return _doc(parts)

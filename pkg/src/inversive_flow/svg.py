"""Minimal SVG output: polylines, markers, axes with ticks, optional log scale.

Coordinates are printed with fixed precision so output is deterministic.
"""

from pathlib import Path
from typing import Optional, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")
WIDTH, HEIGHT = 520, 400
MARGIN = 56


def _nice_ticks(lo: float, hi: float, count: int = 5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10.0 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = np.ceil(lo / step) * step
    return list(np.arange(start, hi + 0.5 * step, step))


def _fmt_tick(v: float) -> str:
    return f"{v:.3g}"


class Canvas:
    """Maps data coordinates into a fixed-size plotting box."""

    def __init__(self, xlim, ylim, width=WIDTH, height=HEIGHT, equal=False):
        self.width, self.height = width, height
        x0, x1 = xlim
        y0, y1 = ylim
        if x1 == x0:
            x0, x1 = x0 - 1, x1 + 1
        if y1 == y0:
            y0, y1 = y0 - 1, y1 + 1
        bw, bh = width - 2 * MARGIN, height - 2 * MARGIN
        if equal:
            scale = min(bw / (x1 - x0), bh / (y1 - y0))
            cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
            x0, x1 = cx - 0.5 * bw / scale, cx + 0.5 * bw / scale
            y0, y1 = cy - 0.5 * bh / scale, cy + 0.5 * bh / scale
        self.xlim, self.ylim = (x0, x1), (y0, y1)
        self.parts = []

    def px(self, x, y):
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        X = MARGIN + (np.asarray(x) - x0) / (x1 - x0) * (self.width - 2 * MARGIN)
        Y = self.height - MARGIN - (np.asarray(y) - y0) / (y1 - y0) * (self.height - 2 * MARGIN)
        return X, Y

    def polyline(self, x, y, color="#000", width=1.2, dash=None, opacity=1.0):
        X, Y = self.px(x, y)
        ok = np.isfinite(X) & np.isfinite(Y)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(X[ok], Y[ok]))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        if opacity != 1.0:
            extra += f' stroke-opacity="{opacity:.2f}"'
        self.parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{extra} points="{pts}"/>'
        )

    def markers(self, x, y, color="#000", r=3.0):
        X, Y = self.px(x, y)
        for a, b in zip(np.atleast_1d(X), np.atleast_1d(Y)):
            self.parts.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="{r}" fill="{color}"/>')

    def text(self, x_px, y_px, s, anchor="middle", size=12, rotate=None):
        tr = f' transform="rotate({rotate} {x_px:.1f} {y_px:.1f})"' if rotate else ""
        self.parts.append(
            f'<text x="{x_px:.1f}" y="{y_px:.1f}" font-size="{size}" font-family="sans-serif" '
            f'text-anchor="{anchor}"{tr}>{escape(s)}</text>'
        )

    def axes(self, xlabel="", ylabel="", logy=False, frame_only=False):
        L, R = MARGIN, self.width - MARGIN
        T, B = MARGIN, self.height - MARGIN
        self.parts.append(
            f'<rect x="{L}" y="{T}" width="{R - L}" height="{B - T}" fill="none" stroke="#444"/>'
        )
        if frame_only:
            return
        for v in _nice_ticks(*self.xlim):
            X, _ = self.px(v, self.ylim[0])
            self.parts.append(f'<line x1="{X:.2f}" y1="{B}" x2="{X:.2f}" y2="{B + 5}" stroke="#444"/>')
            self.text(X, B + 18, _fmt_tick(v), size=10)
        for v in _nice_ticks(*self.ylim):
            _, Y = self.px(self.xlim[0], v)
            self.parts.append(f'<line x1="{L - 5}" y1="{Y:.2f}" x2="{L}" y2="{Y:.2f}" stroke="#444"/>')
            label = f"1e{v:.3g}" if logy else _fmt_tick(v)
            self.text(L - 8, Y + 4, label, anchor="end", size=10)
        if xlabel:
            self.text(0.5 * (L + R), self.height - 14, xlabel)
        if ylabel:
            self.text(16, 0.5 * (T + B), ylabel, rotate=-90)

    def legend(self, labels: Sequence[str]):
        for j, lab in enumerate(labels):
            y = MARGIN + 14 + 16 * j
            x = self.width - MARGIN - 8
            self.parts.append(
                f'<line x1="{x - 150}" y1="{y - 4}" x2="{x - 132}" y2="{y - 4}" '
                f'stroke="{PALETTE[j % len(PALETTE)]}" stroke-width="2"/>'
            )
            self.text(x - 128, y, lab, anchor="start", size=11)

    def render(self, title: str = "") -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">\n'
            f'<rect width="100%" height="100%" fill="white"/>\n'
        )
        body = "\n".join(self.parts)
        ttl = ""
        if title:
            ttl = (f'\n<text x="{self.width / 2:.1f}" y="24" font-size="14" font-family="sans-serif" '
                   f'text-anchor="middle">{escape(title)}</text>')
        return head + body + ttl + "\n</svg>\n"


def _limits(arrays, pad=0.04):
    vals = np.concatenate([np.asarray(a)[np.isfinite(a)] for a in arrays])
    lo, hi = float(vals.min()), float(vals.max())
    d = (hi - lo) * pad or max(abs(lo), 1.0) * pad
    return lo - d, hi + d


def line_plot(series: Sequence[Tuple[np.ndarray, np.ndarray, str]], title="", xlabel="",
              ylabel="", logy=False) -> str:
    """Line chart of (x, y, label) triples; ``logy`` plots log10 of positive y."""
    prepared = []
    for x, y, lab in series:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if logy:
            with np.errstate(divide="ignore", invalid="ignore"):
                y = np.where(y > 0, np.log10(y), np.nan)
        prepared.append((x, y, lab))
    c = Canvas(_limits([p[0] for p in prepared]), _limits([p[1] for p in prepared]))
    c.axes(xlabel, ylabel, logy=logy)
    for j, (x, y, _) in enumerate(prepared):
        c.polyline(x, y, PALETTE[j % len(PALETTE)], width=1.6)
    if len(prepared) > 1:
        c.legend([p[2] for p in prepared])
    return c.render(title)


def curve_plot(curves: Sequence[Tuple[np.ndarray, str]], title="",
               marks: Optional[Sequence[np.ndarray]] = None) -> str:
    """Plane curves (complex arrays) with equal aspect; optional marker sets per curve."""
    xs = [np.asarray(z).real for z, _ in curves]
    ys = [np.asarray(z).imag for z, _ in curves]
    c = Canvas(_limits(xs), _limits(ys), equal=True)
    c.axes("Re z", "Im z")
    for j, (z, _) in enumerate(curves):
        col = PALETTE[j % len(PALETTE)]
        c.polyline(np.real(z), np.imag(z), col, width=1.4)
        if marks is not None and marks[j] is not None and len(marks[j]):
            c.markers(np.real(marks[j]), np.imag(marks[j]), col)
    if len(curves) > 1:
        c.legend([lab for _, lab in curves])
    return c.render(title)


def inverse_stereographic(z):
    """Unit-sphere points (x, y, h) for plane points z, with infinity at the north pole."""
    z = np.asarray(z, dtype=complex)
    d = 1.0 + np.abs(z) ** 2
    return 2 * z.real / d, 2 * z.imag / d, (np.abs(z) ** 2 - 1.0) / d


def sphere_plot(curves: Sequence[Tuple[np.ndarray, str]], title="", tilt=0.9) -> str:
    """Curves lifted to the sphere, orthographic view tilted by ``tilt`` radians.

    Front-facing arcs are solid, the far side is drawn faint and dashed.
    """
    c = Canvas((-1.1, 1.1), (-1.1, 1.1), equal=True)
    t = np.linspace(0, 2 * np.pi, 241)
    c.polyline(np.cos(t), np.sin(t), "#888", width=1.0)
    ct, st = np.cos(tilt), np.sin(tilt)
    eq_x, eq_y, eq_h = np.cos(t), np.sin(t), 0 * t
    # equator for orientation
    c.polyline(eq_x, eq_y * ct + eq_h * st, "#bbb", width=0.8, dash="4,3")
    for j, (z, _) in enumerate(curves):
        x, y, h = inverse_stereographic(z)
        Y = y * ct + h * st
        depth = -y * st + h * ct
        col = PALETTE[j % len(PALETTE)]
        front = depth >= 0
        for mask, kw in ((front, dict(width=1.5)), (~front, dict(width=1.0, dash="3,3", opacity=0.4))):
            xx = np.where(mask, x, np.nan)
            yy = np.where(mask, Y, np.nan)
            # split at gaps so hidden segments are not joined
            idx = np.flatnonzero(np.diff(np.r_[0, mask.astype(int), 0]))
            for a, b in zip(idx[::2], idx[1::2]):
                c.polyline(xx[a:b], yy[a:b], col, **kw)
    c.axes(frame_only=True)
    if len(curves) > 1:
        c.legend([lab for _, lab in curves])
    return c.render(title)


def save(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")

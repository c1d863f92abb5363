"""Minimal deterministic SVG line plots.

Only what the figure kinds need: linear axes with ticks, polylines,
shaded vertical bands, legends and an optional secondary y axis.  Numbers
are written with fixed precision so identical inputs give identical bytes.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f4e9c", "#b03a2e", "#555555", "#2e8b57", "#8e44ad", "#d4a017")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / max(n, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    x = start
    while x <= hi + 1e-9 * step:
        ticks.append(round(x, 12))
        x += step
    return ticks


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:g}"


class Axes:
    """One plotting panel mapped onto a pixel rectangle."""

    def __init__(self, x0, y0, width, height, xlim, ylim, xlabel="", ylabel="", title=""):
        self.x0, self.y0, self.w, self.h = x0, y0, width, height
        self.xlim, self.ylim = xlim, ylim
        self.xlabel, self.ylabel, self.title = xlabel, ylabel, title
        self.items: list[str] = []
        self.legend: list[tuple[str, str, str]] = []
        self.ylim2: Optional[tuple] = None
        self.ylabel2 = ""

    def px(self, x):
        a, b = self.xlim
        return self.x0 + (x - a) / (b - a) * self.w

    def py(self, y, secondary=False):
        a, b = self.ylim2 if secondary else self.ylim
        return self.y0 + self.h - (y - a) / (b - a) * self.h

    def line(self, x, y, color=PALETTE[0], width=1.5, dash: Optional[str] = None,
             label: Optional[str] = None, secondary=False):
        pts = []
        for a, b in zip(np.asarray(x, float), np.asarray(y, float)):
            if math.isfinite(a) and math.isfinite(b):
                pts.append(f"{_fmt(self.px(a))},{_fmt(self.py(b, secondary))}")
        if not pts:
            return
        style = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{style} '
            f'points="{" ".join(pts)}"/>')
        if label:
            self.legend.append((label, color, dash or ""))

    def band(self, lo, hi, color="#dddddd", opacity=0.6, cls="window"):
        a = max(lo, self.xlim[0])
        b = min(hi, self.xlim[1])
        if b <= a:
            return
        self.items.append(
            f'<rect class="{cls}" x="{_fmt(self.px(a))}" y="{_fmt(self.y0)}" '
            f'width="{_fmt(self.px(b) - self.px(a))}" height="{_fmt(self.h)}" '
            f'fill="{color}" fill-opacity="{opacity}"/>')

    def hline(self, y, color="#999999"):
        self.items.append(
            f'<line x1="{_fmt(self.x0)}" y1="{_fmt(self.py(y))}" x2="{_fmt(self.x0 + self.w)}" '
            f'y2="{_fmt(self.py(y))}" stroke="{color}" stroke-width="0.8"/>')

    def render(self) -> str:
        out = [f'<g class="axes">']
        out.append(f'<rect x="{_fmt(self.x0)}" y="{_fmt(self.y0)}" width="{_fmt(self.w)}" '
                   f'height="{_fmt(self.h)}" fill="white" stroke="none"/>')
        bands = [s for s in self.items if s.startswith("<rect")]
        rest = [s for s in self.items if not s.startswith("<rect")]
        out.extend(bands)
        clip = f'clip-{int(self.x0)}-{int(self.y0)}'
        out.append(f'<clipPath id="{clip}"><rect x="{_fmt(self.x0)}" y="{_fmt(self.y0)}" '
                   f'width="{_fmt(self.w)}" height="{_fmt(self.h)}"/></clipPath>')
        out.append(f'<g clip-path="url(#{clip})">')
        out.extend(rest)
        out.append("</g>")
        out.append(f'<rect x="{_fmt(self.x0)}" y="{_fmt(self.y0)}" width="{_fmt(self.w)}" '
                   f'height="{_fmt(self.h)}" fill="none" stroke="black" stroke-width="1"/>')
        for t in nice_ticks(*self.xlim):
            x = self.px(t)
            yb = self.y0 + self.h
            out.append(f'<line x1="{_fmt(x)}" y1="{_fmt(yb)}" x2="{_fmt(x)}" y2="{_fmt(yb + 5)}" stroke="black"/>')
            out.append(f'<text x="{_fmt(x)}" y="{_fmt(yb + 18)}" text-anchor="middle">{_tick_label(t)}</text>')
        for t in nice_ticks(*self.ylim):
            y = self.py(t)
            out.append(f'<line x1="{_fmt(self.x0 - 5)}" y1="{_fmt(y)}" x2="{_fmt(self.x0)}" y2="{_fmt(y)}" stroke="black"/>')
            out.append(f'<text x="{_fmt(self.x0 - 8)}" y="{_fmt(y + 4)}" text-anchor="end">{_tick_label(t)}</text>')
        if self.ylim2 is not None:
            xr = self.x0 + self.w
            for t in nice_ticks(*self.ylim2):
                y = self.py(t, True)
                out.append(f'<line x1="{_fmt(xr)}" y1="{_fmt(y)}" x2="{_fmt(xr + 5)}" y2="{_fmt(y)}" stroke="black"/>')
                out.append(f'<text x="{_fmt(xr + 8)}" y="{_fmt(y + 4)}" text-anchor="start">{_tick_label(t)}</text>')
            out.append(f'<text transform="translate({_fmt(xr + 50)},{_fmt(self.y0 + self.h / 2)}) rotate(90)" '
                       f'text-anchor="middle">{escape(self.ylabel2)}</text>')
        out.append(f'<text x="{_fmt(self.x0 + self.w / 2)}" y="{_fmt(self.y0 + self.h + 38)}" '
                   f'text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text transform="translate({_fmt(self.x0 - 48)},{_fmt(self.y0 + self.h / 2)}) rotate(-90)" '
                   f'text-anchor="middle">{escape(self.ylabel)}</text>')
        if self.title:
            out.append(f'<text x="{_fmt(self.x0 + 6)}" y="{_fmt(self.y0 + 16)}" font-weight="bold">{escape(self.title)}</text>')
        for k, (label, color, dash) in enumerate(self.legend):
            ly = self.y0 + 14 + 16 * k
            lx = self.x0 + self.w - 150
            style = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(f'<line x1="{_fmt(lx)}" y1="{_fmt(ly)}" x2="{_fmt(lx + 24)}" y2="{_fmt(ly)}" '
                       f'stroke="{color}" stroke-width="2"{style}/>')
            out.append(f'<text x="{_fmt(lx + 30)}" y="{_fmt(ly + 4)}">{escape(label)}</text>')
        out.append("</g>")
        return "\n".join(out)


class Figure:
    def __init__(self, width=720, height=480):
        self.width, self.height = width, height
        self.axes: list[Axes] = []

    def add_axes(self, *args, **kwargs) -> Axes:
        ax = Axes(*args, **kwargs)
        self.axes.append(ax)
        return ax

    def to_svg(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}" '
                f'font-family="sans-serif" font-size="11">')
        body = [head, f'<rect width="{self.width}" height="{self.height}" fill="white"/>']
        body.extend(ax.render() for ax in self.axes)
        body.append("</svg>")
        return "\n".join(body) + "\n"


def limits(*arrays: Sequence[float], pad: float = 0.05, include_zero: bool = False):
    vals = np.concatenate([np.asarray(a, float).ravel() for a in arrays]) if arrays else np.array([0.0])
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return (0.0, 1.0)
    lo, hi = float(vals.min()), float(vals.max())
    if include_zero:
        lo, hi = min(lo, 0.0), max(hi, 0.0)
    if hi == lo:
        return (lo - 0.5, hi + 0.5)
    span = hi - lo
    return (lo - pad * span, hi + pad * span)

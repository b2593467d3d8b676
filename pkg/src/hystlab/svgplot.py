"""Minimal self-contained SVG figures: polyline plots with axes and labels.

No plotting dependency; documents are plain SVG 1.1 text. Enough for the
phase portraits, time series, log-log convergence plots, and amplitude
diagrams the command-line driver emits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = ["Panel", "Figure"]

_COLORS = ("#1f3b73", "#b33a3a", "#3a7d44", "#8a5fbf", "#c98a1f", "#4a7f93")


def _fmt(v: float) -> str:
    return f"{v:.2f}" if abs(v) < 1e4 else f"{v:.3g}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi) or lo == hi:
        return [lo]
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / n))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-12 * span:
        out.append(v)
        v += step
    return out


@dataclass
class Panel:
    title: str
    xlabel: str
    ylabel: str
    log_x: bool = False
    log_y: bool = False
    series: list = field(default_factory=list)  # (xs, ys, label, style)
    bands: list = field(default_factory=list)   # (xs, y_lo, y_hi, color)

    def line(self, xs, ys, label: str = "", dashed: bool = False):
        self.series.append((list(map(float, xs)), list(map(float, ys)), label, dashed))

    def band(self, xs, y_lo, y_hi, color: str = "#d9e2f1"):
        self.bands.append(
            (list(map(float, xs)), list(map(float, y_lo)), list(map(float, y_hi)), color)
        )

    def _tx(self, v: float) -> float:
        return math.log10(v) if self.log_x else v

    def _ty(self, v: float) -> float:
        return math.log10(v) if self.log_y else v

    def render(self, x0: float, y0: float, w: float, h: float) -> str:
        pad_l, pad_r, pad_t, pad_b = 52.0, 12.0, 26.0, 38.0
        iw, ih = w - pad_l - pad_r, h - pad_t - pad_b
        xs_all = [self._tx(x) for s in self.series for x in s[0]]
        ys_all = [self._ty(y) for s in self.series for y in s[1]]
        for b in self.bands:
            xs_all += [self._tx(x) for x in b[0]]
            ys_all += [self._ty(y) for y in b[1] + b[2]]
        if not xs_all:
            xs_all = ys_all = [0.0, 1.0]
        x_lo, x_hi = min(xs_all), max(xs_all)
        y_lo, y_hi = min(ys_all), max(ys_all)
        if x_hi == x_lo:
            x_hi = x_lo + 1.0
        if y_hi == y_lo:
            y_hi = y_lo + 1.0
        mx = 0.03 * (x_hi - x_lo)
        my = 0.05 * (y_hi - y_lo)
        x_lo, x_hi, y_lo, y_hi = x_lo - mx, x_hi + mx, y_lo - my, y_hi + my

        def px(v):
            return x0 + pad_l + (self._tx(v) - x_lo) / (x_hi - x_lo) * iw

        def py(v):
            return y0 + pad_t + ih - (self._ty(v) - y_lo) / (y_hi - y_lo) * ih

        parts = [
            f'<rect x="{x0 + pad_l:.1f}" y="{y0 + pad_t:.1f}" width="{iw:.1f}" '
            f'height="{ih:.1f}" fill="white" stroke="#444"/>'
        ]
        for xs, lo_s, hi_s, color in self.bands:
            pts_up = " ".join(f"{px(x):.2f},{py(v):.2f}" for x, v in zip(xs, hi_s))
            pts_dn = " ".join(f"{px(x):.2f},{py(v):.2f}" for x, v in zip(reversed(xs), reversed(lo_s)))
            parts.append(f'<polygon points="{pts_up} {pts_dn}" fill="{color}" stroke="none"/>')
        for vx in _ticks(x_lo, x_hi):
            sx = x0 + pad_l + (vx - x_lo) / (x_hi - x_lo) * iw
            label = _fmt(10**vx) if self.log_x else _fmt(vx)
            parts.append(
                f'<line x1="{sx:.1f}" y1="{y0 + pad_t + ih:.1f}" x2="{sx:.1f}" '
                f'y2="{y0 + pad_t + ih + 4:.1f}" stroke="#444"/>'
                f'<text x="{sx:.1f}" y="{y0 + pad_t + ih + 16:.1f}" font-size="10" '
                f'text-anchor="middle">{label}</text>'
            )
        for vy in _ticks(y_lo, y_hi):
            sy = y0 + pad_t + ih - (vy - y_lo) / (y_hi - y_lo) * ih
            label = _fmt(10**vy) if self.log_y else _fmt(vy)
            parts.append(
                f'<line x1="{x0 + pad_l - 4:.1f}" y1="{sy:.1f}" x2="{x0 + pad_l:.1f}" '
                f'y2="{sy:.1f}" stroke="#444"/>'
                f'<text x="{x0 + pad_l - 6:.1f}" y="{sy + 3:.1f}" font-size="10" '
                f'text-anchor="end">{label}</text>'
            )
        for i, (xs, ys, label, dashed) in enumerate(self.series):
            color = _COLORS[i % len(_COLORS)]
            dash = ' stroke-dasharray="5,4"' if dashed else ""
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys))
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.1"{dash}/>')
            if label:
                ly = y0 + pad_t + 14 + 13 * i
                parts.append(
                    f'<line x1="{x0 + pad_l + 8:.1f}" y1="{ly - 4:.1f}" x2="{x0 + pad_l + 30:.1f}" '
                    f'y2="{ly - 4:.1f}" stroke="{color}"{dash}/>'
                    f'<text x="{x0 + pad_l + 34:.1f}" y="{ly:.1f}" font-size="10">{label}</text>'
                )
        parts.append(
            f'<text x="{x0 + pad_l + iw / 2:.1f}" y="{y0 + 14:.1f}" font-size="12" '
            f'text-anchor="middle" font-weight="bold">{self.title}</text>'
            f'<text x="{x0 + pad_l + iw / 2:.1f}" y="{y0 + h - 6:.1f}" font-size="11" '
            f'text-anchor="middle">{self.xlabel}</text>'
            f'<text x="{x0 + 14:.1f}" y="{y0 + pad_t + ih / 2:.1f}" font-size="11" '
            f'text-anchor="middle" transform="rotate(-90 {x0 + 14:.1f} {y0 + pad_t + ih / 2:.1f})">'
            f"{self.ylabel}</text>"
        )
        return "".join(parts)


@dataclass
class Figure:
    panels: list[Panel] = field(default_factory=list)
    panel_width: float = 460.0
    panel_height: float = 330.0

    def add(self, panel: Panel) -> Panel:
        self.panels.append(panel)
        return panel

    def write(self, path) -> None:
        n = max(len(self.panels), 1)
        total_w = self.panel_width * n
        body = "".join(
            p.render(i * self.panel_width, 0.0, self.panel_width, self.panel_height)
            for i, p in enumerate(self.panels)
        )
        doc = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{total_w:.0f}" '
            f'height="{self.panel_height:.0f}" viewBox="0 0 {total_w:.0f} '
            f'{self.panel_height:.0f}" font-family="Helvetica,Arial,sans-serif">'
            f'<rect width="100%" height="100%" fill="#fbfbfb"/>{body}</svg>\n'
        )
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(doc)

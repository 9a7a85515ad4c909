"""Minimal static SVG line charts (trace, autocorrelation, coverage panels)."""

from __future__ import annotations

from html import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n)


class Panel:
    """One set of axes placed at ``(x0, y0)`` with size ``(w, h)`` in pixels."""

    def __init__(self, x0, y0, w, h, xlim, ylim, title="", xlabel="", ylabel=""):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.xlim = xlim if xlim[1] > xlim[0] else (xlim[0] - 0.5, xlim[0] + 0.5)
        self.ylim = ylim if ylim[1] > ylim[0] else (ylim[0] - 0.5, ylim[0] + 0.5)
        self.parts: list[str] = []
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel

    def sx(self, x):
        a, b = self.xlim
        return self.x0 + (np.asarray(x, float) - a) / (b - a) * self.w

    def sy(self, y):
        a, b = self.ylim
        return self.y0 + self.h - (np.asarray(y, float) - a) / (b - a) * self.h

    def line(self, x, y, color="#1f77b4", width=1.0, dash=None):
        px, py = self.sx(x), self.sy(y)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}"'
                          f'{extra} points="{pts}"/>')

    def step(self, x, y, color="#1f77b4", width=1.0):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        xs = np.repeat(x, 2)[1:]
        ys = np.repeat(y, 2)[:-1]
        self.line(xs, ys, color, width)

    def bars(self, x, y, color="#1f77b4"):
        base = self.sy(0.0)
        for a, b in zip(self.sx(x), self.sy(y)):
            self.parts.append(f'<line x1="{a:.2f}" y1="{base:.2f}" x2="{a:.2f}" y2="{b:.2f}" '
                              f'stroke="{color}" stroke-width="2"/>')

    def render(self) -> str:
        out = [f'<rect x="{self.x0}" y="{self.y0}" width="{self.w}" height="{self.h}" '
               f'fill="none" stroke="#444"/>']
        for t in _ticks(*self.xlim):
            px = float(self.sx(t))
            out.append(f'<text x="{px:.1f}" y="{self.y0 + self.h + 14}" font-size="10" '
                       f'text-anchor="middle">{t:.3g}</text>')
        for t in _ticks(*self.ylim):
            py = float(self.sy(t))
            out.append(f'<text x="{self.x0 - 4}" y="{py + 3:.1f}" font-size="10" '
                       f'text-anchor="end">{t:.3g}</text>')
        if self.title:
            out.append(f'<text x="{self.x0 + self.w / 2}" y="{self.y0 - 6}" font-size="12" '
                       f'text-anchor="middle">{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{self.x0 + self.w / 2}" y="{self.y0 + self.h + 28}" '
                       f'font-size="10" text-anchor="middle">{escape(self.xlabel)}</text>')
        if self.ylabel:
            cx, cy = self.x0 - 36, self.y0 + self.h / 2
            out.append(f'<text x="{cx}" y="{cy}" font-size="10" text-anchor="middle" '
                       f'transform="rotate(-90 {cx} {cy})">{escape(self.ylabel)}</text>')
        return "\n".join(out + self.parts)


def figure(panels: list[Panel], width: int, height: int) -> str:
    body = "\n".join(p.render() for p in panels)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n<rect width="100%" height="100%" fill="white"/>\n'
            f"{body}\n</svg>\n")


def _grid(n: int, cols: int, cell_w=260, cell_h=170, pad_x=60, pad_y=40):
    rows = max(1, -(-n // cols))
    width = cols * (cell_w + pad_x) + 20
    height = rows * (cell_h + pad_y + 20) + 20
    for i in range(n):
        r, c = divmod(i, cols)
        yield (pad_x + c * (cell_w + pad_x), pad_y + r * (cell_h + pad_y + 20), cell_w, cell_h)
    yield (width, height)


def _layout(n: int, cols: int = 3):
    cells = list(_grid(n, min(cols, max(n, 1))))
    return cells[:-1], cells[-1]


def trace_svg(draws: np.ndarray, chain: np.ndarray, names: list[str], max_points: int = 2000) -> str:
    draws = np.atleast_2d(draws)
    cells, (w, h) = _layout(draws.shape[1])
    panels = []
    for j, (x0, y0, cw, ch) in enumerate(cells):
        col = draws[:, j]
        p = Panel(x0, y0, cw, ch, (0, 1), (float(col.min()), float(col.max())),
                  title=names[j], xlabel="iteration")
        for c in np.unique(chain):
            y = col[chain == c]
            idx = np.unique(np.linspace(0, y.size - 1, min(max_points, y.size)).astype(int))
            p.xlim = (0, max(1, y.size - 1))
            p.line(idx, y[idx], PALETTE[int(c) % len(PALETTE)], 0.6)
        panels.append(p)
    return figure(panels, w, h)


def acf_svg(acfs: list[np.ndarray], names: list[str]) -> str:
    cells, (w, h) = _layout(len(acfs))
    panels = []
    for r, name, (x0, y0, cw, ch) in zip(acfs, names, cells):
        r = np.asarray(r)
        p = Panel(x0, y0, cw, ch, (0, max(1, r.size - 1)), (min(-0.1, float(r.min())), 1.0),
                  title=name, xlabel="lag")
        p.bars(np.arange(r.size), r)
        panels.append(p)
    return figure(panels, w, h)


def coverage_svg(levels, rows: list[tuple[str, np.ndarray, np.ndarray]]) -> str:
    """One panel per combination: intercept and averaged slope coverage vs nominal."""
    levels = np.asarray(levels, float)
    cells, (w, h) = _layout(len(rows), cols=2)
    panels = []
    for (title, inter, others), (x0, y0, cw, ch) in zip(rows, cells):
        p = Panel(x0, y0, cw, ch, (0.0, 1.0), (0.0, 1.0), title=title,
                  xlabel="nominal level", ylabel="coverage")
        p.line([0, 1], [0, 1], "#999", 1.0, dash="4,3")
        p.line(levels, inter, PALETTE[0], 1.5)
        p.line(levels, others, PALETTE[1], 1.5)
        panels.append(p)
    return figure(panels, w, h)

"""Minimal self-contained SVG charts (no plotting dependency, deterministic bytes)."""

from __future__ import annotations

from html import escape
from typing import Sequence

W, H = 480, 360
M_LEFT, M_RIGHT, M_TOP, M_BOTTOM = 60, 20, 40, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def _f(v: float) -> str:
    return f"{v:.2f}"


class _Canvas:
    def __init__(self, title: str, width: int = W, height: int = H):
        self.width, self.height = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
            f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        ]

    def add(self, element: str) -> None:
        self.parts.append(element)

    def text(self, x, y, s, anchor="middle", rotate=None, size=None):
        attrs = f'x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}"'
        if rotate is not None:
            attrs += f' transform="rotate({rotate} {_f(x)} {_f(y)})"'
        if size is not None:
            attrs += f' font-size="{size}"'
        self.add(f"<text {attrs}>{escape(str(s))}</text>")

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


class _Axes:
    """Maps data coordinates into the plot area of a canvas."""

    def __init__(self, canvas: _Canvas, xlim, ylim, xlabel="", ylabel=""):
        self.c = canvas
        self.x0, self.x1 = M_LEFT, canvas.width - M_RIGHT
        self.y0, self.y1 = canvas.height - M_BOTTOM, M_TOP
        self.xlim = xlim if xlim[1] > xlim[0] else (xlim[0] - 0.5, xlim[0] + 0.5)
        self.ylim = ylim if ylim[1] > ylim[0] else (ylim[0] - 0.5, ylim[0] + 0.5)
        canvas.add(
            f'<rect x="{self.x0}" y="{self.y1}" width="{self.x1 - self.x0}" '
            f'height="{self.y0 - self.y1}" fill="none" stroke="#333"/>'
        )
        canvas.text((self.x0 + self.x1) / 2, canvas.height - 12, xlabel)
        canvas.text(16, (self.y0 + self.y1) / 2, ylabel, rotate=-90)

    def px(self, x: float) -> float:
        lo, hi = self.xlim
        return self.x0 + (x - lo) / (hi - lo) * (self.x1 - self.x0)

    def py(self, y: float) -> float:
        lo, hi = self.ylim
        return self.y0 - (y - lo) / (hi - lo) * (self.y0 - self.y1)

    def ticks(self, n: int = 5, xfmt="{:.2g}", yfmt="{:.2g}", xticks=True):
        for i in range(n + 1):
            if xticks:
                xv = self.xlim[0] + (self.xlim[1] - self.xlim[0]) * i / n
                self.c.text(self.px(xv), self.y0 + 14, xfmt.format(xv))
            yv = self.ylim[0] + (self.ylim[1] - self.ylim[0]) * i / n
            self.c.text(self.x0 - 6, self.py(yv) + 4, yfmt.format(yv), anchor="end")


def roc_chart(curves: dict[str, Sequence[tuple[float, float]]], title: str = "ROC") -> str:
    canvas = _Canvas(title)
    ax = _Axes(canvas, (0.0, 1.0), (0.0, 1.0), "false positive rate", "true positive rate")
    ax.ticks()
    canvas.add(
        f'<line x1="{_f(ax.px(0))}" y1="{_f(ax.py(0))}" x2="{_f(ax.px(1))}" y2="{_f(ax.py(1))}" '
        'stroke="#999" stroke-dasharray="4 3"/>'
    )
    for i, (name, pts) in enumerate(curves.items()):
        color = PALETTE[i % len(PALETTE)]
        path = " ".join(f"{_f(ax.px(x))},{_f(ax.py(y))}" for x, y in pts)
        canvas.add(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        canvas.add(f'<rect x="{ax.x1 - 150}" y="{ax.y0 - 16 - 14 * i}" width="10" height="10" fill="{color}"/>')
        canvas.text(ax.x1 - 136, ax.y0 - 7 - 14 * i, name, anchor="start")
    return canvas.render()


def bar_chart(labels: Sequence[str], values: Sequence[float], title: str, ylabel: str = "", horizontal=False) -> str:
    if horizontal:
        height = max(H, M_TOP + M_BOTTOM + 18 * len(labels))
        canvas = _Canvas(title, width=640, height=height)
        left = 180
        right = canvas.width - M_RIGHT
        vmax = max(values) if len(values) and max(values) > 0 else 1.0
        for i, (lab, v) in enumerate(zip(labels, values)):
            y = M_TOP + 18 * i
            w = (right - left) * v / vmax
            canvas.add(f'<rect x="{left}" y="{y}" width="{_f(w)}" height="14" fill="{PALETTE[0]}"/>')
            canvas.text(left - 6, y + 11, lab, anchor="end")
            canvas.text(left + w + 4, y + 11, f"{v:.4f}", anchor="start", size=9)
        canvas.text((left + right) / 2, canvas.height - 12, ylabel)
        return canvas.render()
    canvas = _Canvas(title)
    ymax = max(values) if len(values) and max(values) > 0 else 1.0
    ax = _Axes(canvas, (0.0, float(len(labels))), (0.0, ymax * 1.1), "", ylabel)
    ax.ticks(xticks=False, yfmt="{:.0f}" if ymax > 10 else "{:.2g}")
    for i, (lab, v) in enumerate(zip(labels, values)):
        x0, x1 = ax.px(i + 0.15), ax.px(i + 0.85)
        canvas.add(
            f'<rect x="{_f(x0)}" y="{_f(ax.py(v))}" width="{_f(x1 - x0)}" '
            f'height="{_f(ax.py(0) - ax.py(v))}" fill="{PALETTE[i % len(PALETTE)]}"/>'
        )
        canvas.text((x0 + x1) / 2, ax.y0 + 14, lab)
        canvas.text((x0 + x1) / 2, ax.py(v) - 4, f"{v:g}")
    return canvas.render()


def confusion_chart(tp: int, fp: int, fn: int, tn: int, title: str = "Confusion matrix") -> str:
    canvas = _Canvas(title, width=400, height=360)
    cells = [[tn, fp], [fn, tp]]
    vmax = max(tp, fp, fn, tn, 1)
    size, x0, y0 = 120, 120, 80
    for r in range(2):
        for c in range(2):
            v = cells[r][c]
            shade = int(255 - 200 * v / vmax)
            fill = f"rgb({shade},{shade},255)"
            canvas.add(f'<rect x="{x0 + c * size}" y="{y0 + r * size}" width="{size}" height="{size}" fill="{fill}" stroke="#333"/>')
            color = "white" if v > vmax / 2 else "black"
            canvas.add(
                f'<text x="{x0 + c * size + size / 2}" y="{y0 + r * size + size / 2 + 5}" '
                f'text-anchor="middle" font-size="16" fill="{color}">{v}</text>'
            )
    for i, name in enumerate(("not severe", "severe")):
        canvas.text(x0 + i * size + size / 2, y0 - 8, name)
        canvas.text(x0 - 8, y0 + i * size + size / 2 + 4, name, anchor="end")
    canvas.text(x0 + size, y0 - 26, "predicted")
    canvas.text(24, y0 + size, "actual", rotate=-90)
    return canvas.render()


def scatter_chart(x, y, labels, title: str, xlabel: str = "", ylabel: str = "") -> str:
    canvas = _Canvas(title)
    x, y = list(map(float, x)), list(map(float, y))
    pad = lambda lo, hi: (lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo))
    ax = _Axes(canvas, pad(min(x), max(x)), pad(min(y), max(y)), xlabel, ylabel)
    ax.ticks()
    # draw the majority class first so the minority stays visible
    for cls in (0, 1):
        color = PALETTE[cls]
        for xi, yi, li in zip(x, y, labels):
            if int(li) == cls:
                canvas.add(f'<circle cx="{_f(ax.px(xi))}" cy="{_f(ax.py(yi))}" r="2" fill="{color}" fill-opacity="0.6"/>')
    for cls, name in ((0, "not severe"), (1, "severe")):
        canvas.add(f'<circle cx="{ax.x1 - 90}" cy="{ax.y1 + 12 + 14 * cls}" r="4" fill="{PALETTE[cls]}"/>')
        canvas.text(ax.x1 - 82, ax.y1 + 16 + 14 * cls, name, anchor="start")
    return canvas.render()

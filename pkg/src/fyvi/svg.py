"""Minimal static SVG writer: line plots with shaded bands, and labelled scatter plots."""
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"]


class Canvas:
    def __init__(self, xlim, ylim, width=480, height=360, margin=(50, 20, 20, 45)):
        self.width, self.height = width, height
        self.left, self.right, self.top, self.bottom = margin
        self.xlim, self.ylim = xlim, ylim
        self.parts = []

    def px(self, x):
        lo, hi = self.xlim
        return self.left + (np.asarray(x) - lo) / (hi - lo) * (self.width - self.left - self.right)

    def py(self, y):
        lo, hi = self.ylim
        return self.height - self.bottom - (np.asarray(y) - lo) / (hi - lo) * (self.height - self.top - self.bottom)

    def _points(self, x, y):
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(self.px(x), self.py(y)))

    def polyline(self, x, y, color, width=1.5):
        self.parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}" '
                          f'points="{self._points(x, y)}"/>')

    def band(self, x, lower, upper, color, opacity=0.2):
        xs = np.concatenate([x, x[::-1]])
        ys = np.concatenate([upper, lower[::-1]])
        self.parts.append(f'<polygon fill="{color}" fill-opacity="{opacity}" stroke="none" '
                          f'points="{self._points(xs, ys)}"/>')

    def circle(self, x, y, color, r=1.5):
        self.parts.append(f'<circle cx="{float(self.px(x)):.2f}" cy="{float(self.py(y)):.2f}" r="{r}" fill="{color}"/>')

    def cross(self, x, y, color, r=2.5):
        cx, cy = float(self.px(x)), float(self.py(y))
        self.parts.append(f'<path d="M{cx - r:.2f},{cy - r:.2f}L{cx + r:.2f},{cy + r:.2f}'
                          f'M{cx - r:.2f},{cy + r:.2f}L{cx + r:.2f},{cy - r:.2f}" stroke="{color}" stroke-width="1"/>')

    def text(self, x, y, s, size=11, anchor="middle", rotate=None):
        tr = f' transform="rotate({rotate} {x:.1f} {y:.1f})"' if rotate else ""
        self.parts.append(f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" text-anchor="{anchor}" '
                          f'font-family="sans-serif"{tr}>{escape(str(s))}</text>')

    def axes(self, xlabel="", ylabel="", title="", xticks=None, yticks=None):
        x0, x1 = self.px(self.xlim[0]), self.px(self.xlim[1])
        y0, y1 = self.py(self.ylim[0]), self.py(self.ylim[1])
        self.parts.append(f'<rect x="{x0:.2f}" y="{y1:.2f}" width="{x1 - x0:.2f}" height="{y0 - y1:.2f}" '
                          'fill="none" stroke="black"/>')
        for t in (np.linspace(*self.xlim, 5) if xticks is None else xticks):
            self.text(float(self.px(t)), y0 + 14, f"{t:g}", size=9)
        for t in (np.linspace(*self.ylim, 5) if yticks is None else yticks):
            self.text(x0 - 4, float(self.py(t)) + 3, f"{t:.3g}", size=9, anchor="end")
        self.text((x0 + x1) / 2, self.height - 8, xlabel)
        self.text(14, (y0 + y1) / 2, ylabel, rotate=-90)
        self.text((x0 + x1) / 2, 14, title, size=12)

    def render(self):
        body = "\n".join(self.parts)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">\n<rect width="100%" height="100%" fill="white"/>\n'
                f"{body}\n</svg>\n")


def _padded(lo, hi, frac=0.05):
    if hi <= lo:
        return lo - 0.5, hi + 0.5
    pad = frac * (hi - lo)
    return lo - pad, hi + pad


def line_plot(x, series, title="", xlabel="", ylabel=""):
    """``series`` maps a name to (mean, std) arrays aligned with ``x``; std is drawn as a band."""
    x = np.asarray(x, dtype=float)
    lows = [np.asarray(m) - np.asarray(s) for m, s in series.values()]
    highs = [np.asarray(m) + np.asarray(s) for m, s in series.values()]
    canvas = Canvas(_padded(x.min(), x.max(), 0.02), _padded(min(map(np.min, lows)), max(map(np.max, highs))))
    canvas.axes(xlabel, ylabel, title, xticks=x)
    for i, (name, (mean, std)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        mean, std = np.asarray(mean, dtype=float), np.asarray(std, dtype=float)
        canvas.band(x, mean - std, mean + std, color)
        canvas.polyline(x, mean, color)
        for xi, yi in zip(x, mean):
            canvas.circle(xi, yi, color, r=2.5)
        if len(series) > 1:
            canvas.text(canvas.width - canvas.right - 4, canvas.top + 14 * (i + 1), name, size=9, anchor="end")
    return canvas.render()


def ellipse_points(mean, cov, scale=2.0, n=64):
    vals, vecs = np.linalg.eigh(cov)
    t = np.linspace(0, 2 * np.pi, n)
    circle = np.stack([np.cos(t), np.sin(t)])
    return (mean[:, None] + vecs @ (scale * np.sqrt(np.maximum(vals, 0))[:, None] * circle)).T


def scatter_plot(x, labels, means=(), covariances=(), title="", truth=()):
    """2-D points coloured by label (label -1 as grey crosses).

    Black 2-sigma ellipses for the fitted (means, covariances); ``truth`` is an
    optional list of (mean, cov) drawn as coloured ellipses.
    """
    x = np.asarray(x, dtype=float)
    canvas = Canvas(_padded(x[:, 0].min(), x[:, 0].max()), _padded(x[:, 1].min(), x[:, 1].max()),
                    width=420, height=420)
    canvas.axes("x1", "x2", title)
    for point, lab in zip(x, labels):
        if lab < 0:
            canvas.cross(point[0], point[1], "#999999")
        else:
            canvas.circle(point[0], point[1], PALETTE[int(lab) % len(PALETTE)])
    for k, (mean, cov) in enumerate(truth):
        pts = ellipse_points(np.asarray(mean, dtype=float), np.asarray(cov, dtype=float))
        canvas.polyline(pts[:, 0], pts[:, 1], PALETTE[k % len(PALETTE)], width=1.2)
    for mean, cov in zip(means, covariances):
        pts = ellipse_points(np.asarray(mean), np.asarray(cov))
        canvas.polyline(pts[:, 0], pts[:, 1], "black", width=1.2)
    return canvas.render()

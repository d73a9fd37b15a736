"""Hand-rolled SVG output: box plots and the network/salience picture."""

import numpy as np
from xml.sax.saxutils import escape, quoteattr

from sann.errors import InputError

POSITIVE = "#2ca02c"
NEGATIVE = "#d62728"
NEUTRAL = "#ffffff"


def five_number(values):
    """(min, Q1, median, Q3, max) with linear interpolation between order statistics."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise InputError("five-number summary of an empty sample")
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return tuple(float(x) for x in q)


class Canvas:
    def __init__(self, width, height):
        self.width = width
        self.height = height
        self.parts = []

    def add(self, s):
        self.parts.append(s)

    def line(self, x1, y1, x2, y2, stroke="#000", width=1.0, extra=""):
        self.add(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{stroke}" stroke-width="{width:.3f}"{extra}/>'
        )

    def rect(self, x, y, w, h, fill="none", stroke="#000", extra=""):
        self.add(f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" fill="{fill}" stroke="{stroke}"{extra}/>')

    def circle(self, cx, cy, r, fill, stroke="#000", extra=""):
        self.add(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r:.2f}" fill="{fill}" stroke="{stroke}"{extra}/>')

    def text(self, x, y, s, size=11, anchor="middle"):
        self.add(f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" font-family="sans-serif" text-anchor="{anchor}">{escape(str(s))}</text>')

    def render(self):
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">\n'
        )
        return head + "\n".join(self.parts) + "\n</svg>\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.render())


def boxplot_svg(groups, title="", y_label=""):
    """SVG text for ``groups``, a sequence of ``(label, values)`` drawn left to right."""
    groups = [(str(label), np.asarray(values, dtype=np.float64)) for label, values in groups]
    if not groups:
        raise InputError("box plot needs at least one group")
    for label, values in groups:
        if values.size == 0:
            raise InputError(f"box plot group {label!r} is empty")

    stats = [five_number(v) for _, v in groups]
    lo = min(s[0] for s in stats)
    hi = max(s[4] for s in stats)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    left, right, top, bottom = 70, 20, 40, 50
    slot = 70
    width = left + right + slot * len(groups)
    height = 360
    plot_h = height - top - bottom

    def ypos(v):
        return top + (hi - v) / (hi - lo) * plot_h

    c = Canvas(width, height)
    c.rect(0, 0, width, height, fill="#ffffff", stroke="none")
    if title:
        c.text(width / 2, 22, title, size=14)
    c.line(left, top, left, top + plot_h)
    for v in np.linspace(lo + pad, hi - pad, 5):
        c.line(left - 4, ypos(v), left, ypos(v))
        c.text(left - 7, ypos(v) + 4, f"{v:.4g}", size=10, anchor="end")
    if y_label:
        c.add(
            f'<text x="14" y="{top + plot_h / 2:.2f}" font-size="11" font-family="sans-serif" '
            f'text-anchor="middle" transform="rotate(-90 14 {top + plot_h / 2:.2f})">{escape(y_label)}</text>'
        )

    for k, ((label, _), (mn, q1, med, q3, mx)) in enumerate(zip(groups, stats)):
        cx = left + slot * (k + 0.5)
        half = slot * 0.28
        c.add(
            f'<g class="box" data-label={quoteattr(label)} data-min="{mn!r}" data-q1="{q1!r}" '
            f'data-median="{med!r}" data-q3="{q3!r}" data-max="{mx!r}">'
        )
        c.line(cx, ypos(mx), cx, ypos(q3))
        c.line(cx, ypos(q1), cx, ypos(mn))
        c.line(cx - half / 2, ypos(mx), cx + half / 2, ypos(mx))
        c.line(cx - half / 2, ypos(mn), cx + half / 2, ypos(mn))
        c.rect(cx - half, ypos(q3), 2 * half, max(ypos(q1) - ypos(q3), 0.0), fill="#cfe2f3")
        c.line(cx - half, ypos(med), cx + half, ypos(med), stroke="#c55a11", width=2.0, extra=' class="median"')
        c.add("</g>")
        c.text(cx, top + plot_h + 18, label)
    return c.render()


def render_boxplot_svg(groups, path, title="", y_label=""):
    svg = boxplot_svg(groups, title, y_label)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(svg)
    return path


def network_svg(net, title=""):
    """Nodes coloured by salience sign, edges coloured by weight sign and sized by |W| within each layer."""
    if len(net.dims) > 3:
        raise InputError(f"network picture supports at most 3 layers, got dims {net.dims}")
    col_gap, row_gap, r = 220, 26, 8
    n_max = max(net.dims)
    width = 80 + col_gap * (len(net.dims) - 1)
    height = 70 + row_gap * n_max

    def pos(col, i):
        n = net.dims[col]
        y0 = 50 + (n_max - n) * row_gap / 2
        return 40 + col * col_gap, y0 + i * row_gap

    c = Canvas(width, height)
    c.rect(0, 0, width, height, fill="#ffffff", stroke="none")
    if title:
        c.text(width / 2, 22, title, size=14)
    for li, layer in enumerate(net.layers):
        w = layer.weights
        scale = float(np.abs(w).max()) or 1.0
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                x1, y1 = pos(li, j)
                x2, y2 = pos(li + 1, i)
                v = w[i, j]
                colour = POSITIVE if v > 0 else NEGATIVE if v < 0 else "#999999"
                c.line(x1, y1, x2, y2, stroke=colour, width=0.1 + 2.4 * abs(v) / scale, extra=' class="edge" opacity="0.6"')
    for j in range(net.dims[0]):
        c.circle(*pos(0, j), r, NEUTRAL, extra=' class="node input"')
    for li, layer in enumerate(net.layers):
        for i, s in enumerate(layer.salience):
            fill = POSITIVE if s > 0 else NEGATIVE if s < 0 else NEUTRAL
            c.circle(*pos(li + 1, i), r, fill, extra=f' class="node" data-salience="{float(s)!r}"')
    return c.render()


def render_network_svg(net, path, title=""):
    svg = network_svg(net, title)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(svg)
    return path

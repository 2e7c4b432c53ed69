"""Tiny deterministic SVG renderer for the report plots.

Hand-rolled on purpose: output must be byte-identical across runs with the
same inputs, so no plotting library, no timestamps, no hashed ids.  Numbers
are formatted with repr-stable "%.6g".
"""

from __future__ import annotations

import numpy as np

W, H = 720, 440
ML, MR, MT, MB = 70, 20, 30, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _f(x) -> str:
    return f"{float(x):.6g}"


class Frame:
    """Axis frame mapping data coordinates to pixels."""

    def __init__(self, x_range, y_range, title="", x_label="", y_label=""):
        x0, x1 = x_range
        y0, y1 = y_range
        if x1 <= x0:
            x1 = x0 + 1.0
        if y1 <= y0:
            y1 = y0 + 1.0
        pad_x = 0.03 * (x1 - x0)
        pad_y = 0.06 * (y1 - y0)
        self.x0, self.x1 = x0 - pad_x, x1 + pad_x
        self.y0, self.y1 = y0 - pad_y, y1 + pad_y
        self.title, self.x_label, self.y_label = title, x_label, y_label
        self.parts = []

    def px(self, x):
        return ML + (x - self.x0) / (self.x1 - self.x0) * (W - ML - MR)

    def py(self, y):
        return H - MB - (y - self.y0) / (self.y1 - self.y0) * (H - MT - MB)

    def polyline(self, xs, ys, color, width=1.5, dash=None):
        pts = " ".join(f"{_f(self.px(x))},{_f(self.py(y))}" for x, y in zip(xs, ys))
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="{_f(width)}"{dash_attr} points="{pts}"/>'
        )

    def steps(self, xs, ys, color, width=1.5):
        # right-continuous step function
        px, py = [], []
        for i, (x, y) in enumerate(zip(xs, ys)):
            if i:
                px.append(x)
                py.append(ys[i - 1])
            px.append(x)
            py.append(y)
        self.polyline(px, py, color, width)

    def circle(self, x, y, color, r=3.0):
        self.parts.append(
            f'<circle cx="{_f(self.px(x))}" cy="{_f(self.py(y))}" r="{_f(r)}" fill="{color}"/>'
        )

    def rect_data(self, x_lo, x_hi, y_lo, y_hi, fill, opacity=1.0, stroke="none"):
        x, y = self.px(x_lo), self.py(y_hi)
        w, h = self.px(x_hi) - self.px(x_lo), self.py(y_lo) - self.py(y_hi)
        self.parts.append(
            f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" '
            f'fill="{fill}" fill-opacity="{_f(opacity)}" stroke="{stroke}"/>'
        )

    def text_px(self, x, y, s, size=11, anchor="middle", rotate=None):
        rot = f' transform="rotate({_f(rotate)} {_f(x)} {_f(y)})"' if rotate is not None else ""
        self.parts.append(
            f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}" font-family="sans-serif" '
            f'text-anchor="{anchor}"{rot}>{s}</text>'
        )

    def _ticks(self, lo, hi, n=5):
        raw = np.linspace(lo, hi, n)
        return raw

    def render(self, legend=()):
        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
            f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        ]
        axis = (
            f'<line x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" stroke="black"/>'
            f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" stroke="black"/>'
        )
        out.append(axis)
        for t in self._ticks(self.x0, self.x1):
            x = self.px(t)
            out.append(f'<line x1="{_f(x)}" y1="{H - MB}" x2="{_f(x)}" y2="{H - MB + 4}" stroke="black"/>')
            out.append(
                f'<text x="{_f(x)}" y="{H - MB + 18}" font-size="10" font-family="sans-serif" '
                f'text-anchor="middle">{_f(t)}</text>'
            )
        for t in self._ticks(self.y0, self.y1):
            y = self.py(t)
            out.append(f'<line x1="{ML - 4}" y1="{_f(y)}" x2="{ML}" y2="{_f(y)}" stroke="black"/>')
            out.append(
                f'<text x="{ML - 8}" y="{_f(y + 3)}" font-size="10" font-family="sans-serif" '
                f'text-anchor="end">{_f(t)}</text>'
            )
        if self.title:
            out.append(
                f'<text x="{W / 2:.6g}" y="18" font-size="13" font-family="sans-serif" '
                f'text-anchor="middle">{self.title}</text>'
            )
        if self.x_label:
            out.append(
                f'<text x="{W / 2:.6g}" y="{H - 12}" font-size="11" font-family="sans-serif" '
                f'text-anchor="middle">{self.x_label}</text>'
            )
        if self.y_label:
            out.append(
                f'<text x="16" y="{H / 2:.6g}" font-size="11" font-family="sans-serif" '
                f'text-anchor="middle" transform="rotate(-90 16 {H / 2:.6g})">{self.y_label}</text>'
            )
        out.extend(self.parts)
        for i, (label, color) in enumerate(legend):
            y = MT + 14 + 16 * i
            out.append(f'<rect x="{W - MR - 150}" y="{y - 9}" width="12" height="9" fill="{color}"/>')
            out.append(
                f'<text x="{W - MR - 133}" y="{y}" font-size="11" font-family="sans-serif" '
                f'text-anchor="start">{label}</text>'
            )
        out.append("</svg>")
        return "\n".join(out) + "\n"


def line_plot(series, title="", x_label="", y_label="", markers=True) -> str:
    """series: list of (label, xs, ys)."""
    all_x = np.concatenate([np.asarray(s[1], dtype=np.float64) for s in series])
    all_y = np.concatenate([np.asarray(s[2], dtype=np.float64) for s in series])
    fr = Frame((all_x.min(), all_x.max()), (all_y.min(), all_y.max()), title, x_label, y_label)
    legend = []
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        fr.polyline(xs, ys, color)
        if markers:
            for x, y in zip(xs, ys):
                fr.circle(x, y, color, r=2.5)
        legend.append((label, color))
    return fr.render(legend=legend)


def ecdf_plot(series, title="", x_label="") -> str:
    """series: list of (label, values, probabilities); renders right-continuous
    CDF steps ending at 1."""
    all_v = np.concatenate([np.asarray(s[1], dtype=np.float64) for s in series])
    fr = Frame((all_v.min(), all_v.max()), (0.0, 1.0), title, x_label, "cumulative probability")
    legend = []
    for i, (label, vals, probs) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        order = np.argsort(vals, kind="stable")
        v = np.asarray(vals)[order]
        c = np.cumsum(np.asarray(probs)[order])
        xs = np.concatenate([[all_v.min()], v, [all_v.max()]])
        ys = np.concatenate([[0.0], c, [c[-1]]])
        fr.steps(xs, ys, color)
        legend.append((label, color))
    return fr.render(legend=legend)


def band_plot(groups, title="", x_label="", y_label="") -> str:
    """groups: list of (label, xs, mean, lo, hi); shaded min/max band plus mean."""
    all_x = np.concatenate([np.asarray(g[1], dtype=np.float64) for g in groups])
    all_y = np.concatenate(
        [np.concatenate([np.asarray(g[3]), np.asarray(g[4])]) for g in groups]
    )
    fr = Frame((all_x.min(), all_x.max()), (all_y.min(), all_y.max()), title, x_label, y_label)
    legend = []
    for i, (label, xs, mean, lo, hi) in enumerate(groups):
        color = PALETTE[i % len(PALETTE)]
        xs = np.asarray(xs, dtype=np.float64)
        for j in range(xs.size - 1):
            fr.rect_data(xs[j], xs[j + 1], min(lo[j], lo[j + 1]), max(hi[j], hi[j + 1]), color, 0.15)
        fr.polyline(xs, mean, color)
        legend.append((label, color))
    return fr.render(legend=legend)


def heatmap(values, row_labels, col_labels, title="", x_label="", y_label="") -> str:
    vals = np.asarray(values, dtype=np.float64)
    rows, cols = vals.shape
    fr = Frame((0, cols), (0, rows), title, x_label, y_label)
    lo, hi = float(vals.min()), float(vals.max())
    span = hi - lo if hi > lo else 1.0
    for r in range(rows):
        for c in range(cols):
            frac = (vals[r, c] - lo) / span
            shade = int(round(235 - 180 * frac))
            fr.rect_data(c, c + 1, rows - 1 - r, rows - r, f"rgb({shade},{shade},255)", 1.0, "white")
            fr.text_px(
                fr.px(c + 0.5), fr.py(rows - 1 - r + 0.5) + 4, _f(vals[r, c]), size=10
            )
    for c, lab in enumerate(col_labels):
        fr.text_px(fr.px(c + 0.5), H - MB + 18, str(lab), size=10)
    for r, lab in enumerate(row_labels):
        fr.text_px(ML - 8, fr.py(rows - 1 - r + 0.5) + 3, str(lab), size=10, anchor="end")
    return fr.render()


def quantile_boxes(groups, title="", x_label="", y_label="") -> str:
    """groups: list of (label, stats) with stats = (min, q10, q25, med, q75, q90, max)."""
    n = len(groups)
    all_y = np.concatenate([np.asarray(g[1], dtype=np.float64) for g in groups])
    fr = Frame((0, n), (all_y.min(), all_y.max()), title, x_label, y_label)
    for i, (label, stats) in enumerate(groups):
        mn, q10, q25, med, q75, q90, mx = stats
        cx = i + 0.5
        color = PALETTE[i % len(PALETTE)]
        fr.polyline([cx, cx], [mn, mx], color, width=1.0)
        fr.rect_data(cx - 0.18, cx + 0.18, q25, q75, color, 0.35)
        fr.rect_data(cx - 0.28, cx + 0.28, q10, q90, color, 0.15)
        fr.polyline([cx - 0.18, cx + 0.18], [med, med], color, width=2.0)
        fr.text_px(fr.px(cx), H - MB + 18, str(label), size=10)
    return fr.render()

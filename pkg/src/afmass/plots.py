"""Minimal self-contained SVG scatter/line plots with embedded data tables.

No plotting dependency: the sweep emits a handful of log-log trend plots, and
a small hand-rolled writer keeps the artifact reproducible byte-for-byte.
Each plot embeds its data as an XML comment so the numbers travel with the
picture.
"""

from __future__ import annotations

import numpy as np

WIDTH, HEIGHT = 640, 480
MARGIN = 70


def _ticks(lo: float, hi: float, log: bool):
    if log:
        lo_e = int(np.floor(np.log10(lo)))
        hi_e = int(np.ceil(np.log10(hi)))
        return [10.0**e for e in range(lo_e, hi_e + 1)]
    span = hi - lo
    step = 10.0 ** np.floor(np.log10(span / 4.0))
    if span / step > 8:
        step *= 2
    t0 = np.ceil(lo / step) * step
    return list(np.arange(t0, hi + step / 2, step))


class _Axis:
    def __init__(self, lo, hi, pix_lo, pix_hi, log):
        if log:
            lo, hi = np.log10(lo), np.log10(hi)
        if hi - lo < 1e-300:
            hi = lo + 1.0
        self.lo, self.hi, self.pix_lo, self.pix_hi, self.log = lo, hi, pix_lo, pix_hi, log

    def __call__(self, v):
        v = np.log10(v) if self.log else v
        t = (v - self.lo) / (self.hi - self.lo)
        return self.pix_lo + t * (self.pix_hi - self.pix_lo)


def line_plot(path, x, y, *, title, xlabel, ylabel, loglog=False,
              series_label="data", fit_line=None):
    """Write a scatter+line plot.  ``fit_line`` is an optional (slope,
    intercept) pair drawn in log10 space when loglog is set."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y)
    if loglog:
        keep &= (x > 0) & (y > 0)
    xs, ys = x[keep], y[keep]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
             f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
             f"<!-- data {series_label}: "
             + " ".join(f"({a!r},{b!r})" for a, b in zip(x, y)) + " -->",
             f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    parts.append(f'<text x="{WIDTH//2}" y="28" text-anchor="middle" '
                 f'font-size="16">{title}</text>')
    if len(xs) == 0:
        parts.append(f'<text x="{WIDTH//2}" y="{HEIGHT//2}" text-anchor="middle" '
                     f'font-size="14">no plottable data</text></svg>')
        with open(path, "w") as fh:
            fh.write("\n".join(parts))
        return
    pad = 0.08
    def padded(v):
        lo, hi = float(np.min(v)), float(np.max(v))
        if loglog:
            lo, hi = np.log10(lo), np.log10(hi)
            span = max(hi - lo, 1e-3)
            return 10.0 ** (lo - pad * span), 10.0 ** (hi + pad * span)
        span = max(hi - lo, 1e-12)
        return lo - pad * span, hi + pad * span
    x_lo, x_hi = padded(xs)
    y_lo, y_hi = padded(ys)
    ax = _Axis(x_lo, x_hi, MARGIN, WIDTH - 30, loglog)
    ay = _Axis(y_lo, y_hi, HEIGHT - MARGIN, 40, loglog)
    # frame and ticks
    parts.append(f'<rect x="{MARGIN}" y="40" width="{WIDTH-30-MARGIN}" '
                 f'height="{HEIGHT-MARGIN-40}" fill="none" stroke="black"/>')
    for t in _ticks(x_lo, x_hi, loglog):
        px = ax(t)
        if not (MARGIN - 1 <= px <= WIDTH - 29):
            continue
        parts.append(f'<line x1="{px:.1f}" y1="{HEIGHT-MARGIN}" x2="{px:.1f}" '
                     f'y2="{HEIGHT-MARGIN+6}" stroke="black"/>')
        parts.append(f'<text x="{px:.1f}" y="{HEIGHT-MARGIN+22}" '
                     f'text-anchor="middle" font-size="11">{t:g}</text>')
    for t in _ticks(y_lo, y_hi, loglog):
        py = ay(t)
        if not (41 <= py <= HEIGHT - MARGIN + 1):
            continue
        parts.append(f'<line x1="{MARGIN-6}" y1="{py:.1f}" x2="{MARGIN}" '
                     f'y2="{py:.1f}" stroke="black"/>')
        parts.append(f'<text x="{MARGIN-10}" y="{py+4:.1f}" text-anchor="end" '
                     f'font-size="11">{t:g}</text>')
    parts.append(f'<text x="{WIDTH//2}" y="{HEIGHT-12}" text-anchor="middle" '
                 f'font-size="13">{xlabel}</text>')
    parts.append(f'<text x="18" y="{HEIGHT//2}" text-anchor="middle" '
                 f'font-size="13" transform="rotate(-90 18 {HEIGHT//2})">{ylabel}</text>')
    order = np.argsort(xs)
    pts = " ".join(f"{ax(a):.1f},{ay(b):.1f}" for a, b in zip(xs[order], ys[order]))
    parts.append(f'<polyline points="{pts}" fill="none" stroke="steelblue" '
                 f'stroke-width="1.5"/>')
    for a, b in zip(xs, ys):
        parts.append(f'<circle cx="{ax(a):.1f}" cy="{ay(b):.1f}" r="4" '
                     f'fill="steelblue"/>')
    if fit_line is not None and loglog:
        slope, intercept = fit_line
        fx = np.array([x_lo, x_hi])
        fy = 10.0 ** (slope * np.log10(fx) + intercept)
        parts.append(f'<line x1="{ax(fx[0]):.1f}" y1="{ay(max(fy[0], y_lo)):.1f}" '
                     f'x2="{ax(fx[1]):.1f}" y2="{ay(min(max(fy[1], y_lo), y_hi)):.1f}" '
                     f'stroke="firebrick" stroke-dasharray="6,4"/>')
        parts.append(f'<text x="{WIDTH-40}" y="56" text-anchor="end" font-size="12" '
                     f'fill="firebrick">slope {slope:.3f}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))

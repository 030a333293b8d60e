"""Minimal SVG line chart of log10 MSPE against log10 n."""

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=20, top=40, bottom=55)


def _ticks(lo, hi):
    return list(range(math.floor(lo), math.ceil(hi) + 1))


def convergence_svg(sigma_history, fit=None, title="Greedy max-MSPE decay"):
    """Return SVG markup; ``fit`` is an optional loglog ConvergenceFit overlay."""
    pts = [(math.log10(n), math.log10(s)) for n, s in enumerate(sigma_history, start=1) if s > 0]
    if not pts:
        pts = [(0.0, 0.0)]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x0, x1 = 0.0, max(max(xs), 1.0)
    y0, y1 = math.floor(min(ys)), math.ceil(max(ys))
    if y1 - y0 < 1:
        y0, y1 = y0 - 1, y1 + 1
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN["top"] + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        if x0 <= t <= x1:
            out.append(f'<line x1="{px(t):.2f}" y1="{MARGIN["top"] + ph}" x2="{px(t):.2f}" '
                       f'y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{px(t):.2f}" y="{MARGIN["top"] + ph + 19}" text-anchor="middle">'
                       f'1e{t}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{py(t):.2f}" x2="{MARGIN["left"]}" '
                   f'y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<line x1="{MARGIN["left"]}" y1="{py(t):.2f}" x2="{MARGIN["left"] + pw}" '
                   f'y2="{py(t):.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{py(t) + 4:.2f}" text-anchor="end">1e{t}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">'
               'number of landmarks n</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">max MSPE</text>')
    poly = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
    out.append(f'<polyline points="{poly}" fill="none" stroke="#1f77b4" stroke-width="1.8"/>')
    if fit is not None and fit.scale == "loglog":
        a, b = fit.n_range
        # fit is in natural logs; convert to log10 coordinates
        la, lb = math.log10(a), math.log10(b)
        ya = (fit.slope * math.log(a) + fit.intercept) / math.log(10)
        yb = (fit.slope * math.log(b) + fit.intercept) / math.log(10)
        out.append(f'<line x1="{px(la):.2f}" y1="{py(ya):.2f}" x2="{px(lb):.2f}" y2="{py(yb):.2f}" '
                   'stroke="#d62728" stroke-width="1.5" stroke-dasharray="6,4"/>')
        out.append(f'<text x="{MARGIN["left"] + pw - 8}" y="{MARGIN["top"] + 18}" text-anchor="end" '
                   f'fill="#d62728">slope {fit.slope:.3f}, R² {fit.r_squared:.3f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_convergence_svg(path, sigma_history, fit=None, title="Greedy max-MSPE decay"):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(convergence_svg(sigma_history, fit, title))

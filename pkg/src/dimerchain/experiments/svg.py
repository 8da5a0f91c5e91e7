"""Minimal SVG plotting: line series and heatmaps.

Plots are run conveniences; the CSV records are the contract.  The
renderer keeps no third-party dependencies: it writes polylines and
rect grids with hand-placed axes and tick labels.
"""

import math

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 80, 30, 40, 60
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f")


def _esc(s):
    return (str(s).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / max(n - 1, 1)))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * span:
        out.append(round(t, 12))
        t += step
    return out or [lo, hi]


def _transform(vals, lo, hi, p0, p1, log):
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
        vals = [math.log10(v) for v in vals]
    if hi <= lo:
        hi = lo + 1.0
    return [p0 + (v - lo) * (p1 - p0) / (hi - lo) for v in vals]


def line_plot(path, series, title="", xlabel="", ylabel="", logx=False,
              logy=False):
    """series: list of (label, x values, y values); log axes drop
    nonpositive points."""
    pts = []
    for _, xs, ys in series:
        for x, y in zip(xs, ys):
            if (not logx or x > 0) and (not logy or y > 0):
                pts.append((float(x), float(y)))
    if not pts:
        raise ValueError("nothing to plot")
    xlo, xhi = min(p[0] for p in pts), max(p[0] for p in pts)
    ylo, yhi = min(p[1] for p in pts), max(p[1] for p in pts)
    if ylo == yhi:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    if xlo == xhi:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    x0, x1 = _ML, _W - _MR
    y0, y1 = _H - _MB, _MT
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="monospace" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W/2}" y="20" text-anchor="middle" font-size="14">'
        f"{_esc(title)}</text>",
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2}" y="{_H - 15}" text-anchor="middle">'
        f"{_esc(xlabel)}</text>",
        f'<text x="18" y="{(y0 + y1) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2})">{_esc(ylabel)}</text>',
    ]
    xticks = _ticks(math.log10(xlo) if logx else xlo,
                    math.log10(xhi) if logx else xhi)
    for t in xticks:
        v = 10**t if logx else t
        if not (xlo <= v <= xhi or logx):
            continue
        (px,) = _transform([v], xlo, xhi, x0, x1, logx)
        parts.append(f'<line x1="{px:.1f}" y1="{y0}" x2="{px:.1f}" '
                     f'y2="{y0 + 5}" stroke="black"/>')
        parts.append(f'<text x="{px:.1f}" y="{y0 + 20}" text-anchor="middle">'
                     f"{v:.4g}</text>")
    yticks = _ticks(math.log10(ylo) if logy else ylo,
                    math.log10(yhi) if logy else yhi)
    for t in yticks:
        v = 10**t if logy else t
        (py,) = _transform([v], ylo, yhi, y0, y1, logy)
        parts.append(f'<line x1="{x0 - 5}" y1="{py:.1f}" x2="{x0}" '
                     f'y2="{py:.1f}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 8}" y="{py + 4:.1f}" text-anchor="end">'
                     f"{v:.3g}</text>")
    for i, (label, xs, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        keep = [(float(x), float(y)) for x, y in zip(xs, ys)
                if (not logx or x > 0) and (not logy or y > 0)]
        if not keep:
            continue
        px = _transform([p[0] for p in keep], xlo, xhi, x0, x1, logx)
        py = _transform([p[1] for p in keep], ylo, yhi, y0, y1, logy)
        if len(keep) == 1:
            parts.append(f'<circle cx="{px[0]:.1f}" cy="{py[0]:.1f}" r="3" '
                         f'fill="{color}"/>')
        else:
            d = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(px, py))
            parts.append(f'<polyline points="{d}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{x1 - 150}" y="{_MT + 16 * (i + 1)}" '
                     f'fill="{color}">{_esc(label)}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(parts) + "\n")


_RAMP = ((68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98),
         (253, 231, 37))


def _ramp_color(t):
    t = min(max(t, 0.0), 1.0) * (len(_RAMP) - 1)
    i = min(int(t), len(_RAMP) - 2)
    f = t - i
    r, g, b = (round(a + (b2 - a) * f)
               for a, b2 in zip(_RAMP[i], _RAMP[i + 1]))
    return f"rgb({r},{g},{b})"


def heatmap(path, xs, ys, Z, title="", xlabel="", ylabel="", log=True):
    """Z[i][j] colored at (xs[j], ys[i]); log maps colors on log10 scale.

    Nonpositive cells under log get the lowest color."""
    ny, nx = len(ys), len(xs)
    vals = [Z[i][j] for i in range(ny) for j in range(nx)
            if not log or Z[i][j] > 0]
    if not vals:
        raise ValueError("nothing to plot")
    if log:
        lo, hi = math.log10(min(vals)), math.log10(max(vals))
    else:
        lo, hi = min(vals), max(vals)
    if hi <= lo:
        hi = lo + 1.0
    x0, x1 = _ML, _W - _MR
    y0, y1 = _H - _MB, _MT
    cw, ch = (x1 - x0) / nx, (y0 - y1) / ny
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="monospace" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W/2}" y="20" text-anchor="middle" font-size="14">'
        f"{_esc(title)} [{'log10 ' if log else ''}color "
        f"{lo:.3g}..{hi:.3g}]</text>",
        f'<text x="{(x0 + x1) / 2}" y="{_H - 15}" text-anchor="middle">'
        f"{_esc(xlabel)}</text>",
        f'<text x="18" y="{(y0 + y1) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2})">{_esc(ylabel)}</text>',
    ]
    for i in range(ny):
        for j in range(nx):
            v = Z[i][j]
            if log:
                t = 0.0 if v <= 0 else (math.log10(v) - lo) / (hi - lo)
            else:
                t = (v - lo) / (hi - lo)
            parts.append(
                f'<rect x="{x0 + j * cw:.1f}" y="{y0 - (i + 1) * ch:.1f}" '
                f'width="{cw + 0.5:.1f}" height="{ch + 0.5:.1f}" '
                f'fill="{_ramp_color(t)}"/>'
            )
    xstride = max(1, nx // 10)
    for j in range(0, nx, xstride):
        parts.append(f'<text x="{x0 + (j + 0.5) * cw:.1f}" y="{y0 + 20}" '
                     f'text-anchor="middle">{xs[j]:.3g}</text>')
    ystride = max(1, ny // 10)
    for i in range(0, ny, ystride):
        parts.append(f'<text x="{x0 - 8}" y="{y0 - (i + 0.5) * ch + 4:.1f}" '
                     f'text-anchor="end">{ys[i]:.4g}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(parts) + "\n")

"""Static SVG heat maps of sweep results, rendered from the written CSV rows."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

CELL = 48
MARGIN = 60
GAP = 70
TITLE_H = 40

# viridis anchor colours, low -> high
_ANCHORS = [(68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37)]


def _colour(frac):
    if not math.isfinite(frac):
        return "#bbbbbb"
    frac = min(max(frac, 0.0), 1.0) * (len(_ANCHORS) - 1)
    i = min(int(frac), len(_ANCHORS) - 2)
    t = frac - i
    rgb = [round(a + t * (b - a)) for a, b in zip(_ANCHORS[i], _ANCHORS[i + 1])]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _num(x):
    return format(float(x), ".10g")


def render_sweep_svg(rows, mu) -> str:
    """Side-by-side robust/optimal error maps over the (delta1, delta2) grid for one mu.

    ``rows`` are dicts as returned by ``read_sweep_csv``.  Both panels share one
    colour scale.  Each cell rect carries data-* attributes with its exact
    coordinates and value.
    """
    rows = [r for r in rows if r["mu"] == mu]
    d1s = sorted({r["delta1"] for r in rows})
    d2s = sorted({r["delta2"] for r in rows})
    values = [r[k] for r in rows for k in ("sigma_s2_robust", "sigma_s2_optimal") if math.isfinite(r[k])]
    lo, hi = (min(values), max(values)) if values else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0

    pw, ph = CELL * len(d1s), CELL * len(d2s)
    width = 2 * MARGIN + 2 * pw + GAP
    height = TITLE_H + MARGIN + ph + MARGIN
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<title>smoothed error, mu = {_num(mu)}</title>',
           f'<text x="{width / 2:g}" y="22" text-anchor="middle" font-size="14">'
           f'Smoothed error sigma_s^2 (rad^2), mu = {escape(_num(mu))}; '
           f'colour scale {_num(lo)} .. {_num(hi)}</text>']
    for p, (key, label) in enumerate((("sigma_s2_robust", "robust"), ("sigma_s2_optimal", "optimal"))):
        x0 = MARGIN + p * (pw + GAP)
        y0 = TITLE_H + MARGIN // 2
        out.append(f'<g class="panel" data-estimator="{label}">')
        out.append(f'<text x="{x0 + pw / 2:g}" y="{y0 - 8}" text-anchor="middle">{label}</text>')
        for r in rows:
            i, j = d1s.index(r["delta1"]), d2s.index(r["delta2"])
            x = x0 + i * CELL
            y = y0 + (len(d2s) - 1 - j) * CELL
            v = r[key]
            out.append(f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                       f'fill="{_colour((v - lo) / span)}" data-estimator="{label}" '
                       f'data-delta1="{_num(r["delta1"])}" data-delta2="{_num(r["delta2"])}" '
                       f'data-value="{_num(v)}"/>')
        for i, d in enumerate(d1s):
            out.append(f'<text x="{x0 + i * CELL + CELL / 2:g}" y="{y0 + ph + 14}" '
                       f'text-anchor="middle">{_num(d)}</text>')
        for j, d in enumerate(d2s):
            out.append(f'<text x="{x0 - 4}" y="{y0 + (len(d2s) - 1 - j) * CELL + CELL / 2 + 4:g}" '
                       f'text-anchor="end">{_num(d)}</text>')
        out.append(f'<text x="{x0 + pw / 2:g}" y="{y0 + ph + 32}" text-anchor="middle">delta1</text>')
        out.append(f'<text x="{x0 - 40}" y="{y0 + ph / 2:g}" text-anchor="middle" '
                   f'transform="rotate(-90 {x0 - 40} {y0 + ph / 2:g})">delta2</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"

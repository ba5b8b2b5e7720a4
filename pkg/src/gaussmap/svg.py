"""SVG figures of projected singular curves."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .planar import NotNormal, whitney
from .projection import TYPE_A

WIDTH = 640
MARGIN = 40
MAX_POINTS = 1200
ARROWS_PER_CURVE = 6


def report_geometry(report) -> dict:
    """Plain-data geometry of the projected curves of an analyzed report."""
    curves = []
    for c in report.singular_curves:
        pts = np.asarray(c.gamma)
        step = max(1, len(pts) // MAX_POINTS)
        sub = pts[::step]
        cusps = [{"point": [float(k.point[0]), float(k.point[1])],
                  "type": "a" if k.side_class.get(1) == TYPE_A else "b",
                  "degenerate": bool(k.degenerate)} for k in c.cusps]
        crossings = _crossings(sub)
        curves.append({"index": c.index, "points": sub.round(9).tolist(), "cusps": cusps,
                       "crossings": crossings})
    return {
        "curves": curves,
        "legend": {"n": report.n, "c": report.c_total, "omega": report.omega_total,
                   "Y": [[round(float(x), 9) for x in p] for p in report.missing.points]},
    }


def _crossings(P: np.ndarray) -> list:
    try:
        wd = whitney(P)
    except NotNormal:
        return []
    return [{"point": list(q.point), "sign": q.sign} for q in wd.crossings]


def _arrow(p, d, size) -> str:
    d = d / (np.linalg.norm(d) or 1.0)
    n = np.array([-d[1], d[0]])
    tip = p + d * size
    a = p - d * size * 0.5 + n * size * 0.6
    b = p - d * size * 0.5 - n * size * 0.6
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in (tip, a, b))


def render_svg(geometry: dict, title: str = "") -> str:
    """SVG text for the geometry produced by :func:`report_geometry`."""
    curves = geometry["curves"]
    allpts = np.concatenate([np.asarray(c["points"], dtype=float) for c in curves]) if curves else np.zeros((1, 2))
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    scale = (WIDTH - 2 * MARGIN) / span
    centre = 0.5 * (lo + hi)

    def tr(p):
        p = np.asarray(p, dtype=float)
        x = WIDTH / 2 + (p[..., 0] - centre[0]) * scale
        y = WIDTH / 2 - (p[..., 1] - centre[1]) * scale
        return np.stack([x, y], axis=-1)

    height = WIDTH + 90
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
           f'viewBox="0 0 {WIDTH} {height}">',
           f'<rect width="{WIDTH}" height="{height}" fill="white"/>']
    if title:
        out.append(f'<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="16">{escape(title)}</text>')
    for c in curves:
        P = tr(c["points"])
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in P)
        out.append(f'<polygon class="curve" points="{pts}" fill="none" stroke="#1f4e99" stroke-width="1.5"/>')
        m = len(P)
        for k in range(ARROWS_PER_CURVE):
            i = (k * m) // ARROWS_PER_CURVE
            d = P[(i + 1) % m] - P[i - 1]
            out.append(f'<polygon class="arrow" points="{_arrow(P[i], d, 7.0)}" fill="#1f4e99"/>')
        for q in c["cusps"]:
            x, y = tr(q["point"])
            out.append(f'<circle class="cusp" cx="{x:.2f}" cy="{y:.2f}" r="4.5" fill="#c0392b"/>')
            out.append(f'<text x="{x + 6:.2f}" y="{y - 6:.2f}" font-family="sans-serif" font-size="13" '
                       f'fill="#c0392b">{q["type"]}</text>')
        for q in c["crossings"]:
            x, y = tr(q["point"])
            sign = "+" if q["sign"] > 0 else "-"
            out.append(f'<circle class="crossing" cx="{x:.2f}" cy="{y:.2f}" r="5" fill="none" stroke="#27ae60" '
                       f'stroke-width="1.5"/>')
            out.append(f'<text x="{x + 7:.2f}" y="{y + 14:.2f}" font-family="sans-serif" font-size="13" '
                       f'fill="#27ae60">{sign}</text>')
    leg = geometry["legend"]
    ys = "; ".join("(" + ", ".join(f"{v:.4g}" for v in p) + ")" for p in leg["Y"]) or "none"
    lines = [f"n = {leg['n']}    c(Sigma) = {leg['c']}    omega(Sigma) = {leg['omega']}", f"Y = {ys}"]
    for k, line in enumerate(lines):
        out.append(f'<text class="legend" x="{MARGIN}" y="{WIDTH + 30 + 22 * k}" font-family="sans-serif" '
                   f'font-size="14">{escape(line)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

"""Static SVG renderings of the banjo, heatmap and unlabeled-run CDF data.

Hand-built markup keeps the files byte-identical across runs and platforms.
"""

from __future__ import annotations

import os
from xml.sax.saxutils import escape

from .report import ReportSet, bucket_labels, fmt2

PALETTE = ("#d9d9d9", "#fdae61", "#f46d43", "#a50026")
LINE_COLORS = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666")


def _svg(width: int, height: int, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">'
    )
    return "\n".join([head, *body, "</svg>", ""])


def _text(x: float, y: float, s: str, anchor: str = "start", extra: str = "") -> str:
    return f'<text x="{fmt2(x)}" y="{fmt2(y)}" text-anchor="{anchor}"{extra}>{escape(s)}</text>'


def banjo_svg(rs: ReportSet) -> str:
    """Two stacked bars per country (convergent above, divergent below the axis)."""
    labels = bucket_labels(rs.citm_buckets)
    rows = rs.banjo
    bar_w, gap, left, mid, scale_h = 28, 14, 50, 170, 140
    top = max([r.outline for r in rows] + [1.0])
    k = scale_h / top
    width = left + len(rows) * (bar_w + gap) + 120
    body = [f'<line x1="{left}" y1="{mid}" x2="{width - 110}" y2="{mid}" stroke="black"/>']
    for i, r in enumerate(rows):
        x = left + i * (bar_w + gap)
        counts = dict(r.counts)
        y_up = y_down = float(mid)
        for j, lab in enumerate(labels):
            h = counts[f"convergent_{lab}"] * k
            y_up -= h
            body.append(f'<rect x="{x}" y="{fmt2(y_up)}" width="{bar_w}" height="{fmt2(h)}" fill="{PALETTE[j % 4]}"/>')
            h = counts[f"divergent_{lab}"] * k
            body.append(f'<rect x="{x}" y="{fmt2(y_down)}" width="{bar_w}" height="{fmt2(h)}" fill="{PALETTE[j % 4]}"/>')
            y_down += h
        outline = r.outline * k
        body.append(
            f'<rect x="{x - 2}" y="{fmt2(mid - outline)}" width="{bar_w + 4}" height="{fmt2(outline)}" '
            'fill="none" stroke="black" stroke-dasharray="3,2"/>'
        )
        body.append(_text(x + bar_w / 2, 2 * mid - 5 + 18, r.country, "middle"))
    lx = width - 100
    for j, lab in enumerate(labels):
        body.append(f'<rect x="{lx}" y="{20 + 16 * j}" width="10" height="10" fill="{PALETTE[j % 4]}"/>')
        body.append(_text(lx + 14, 29 + 16 * j, f"{lab} CitMs"))
    body.append(_text(8, mid - scale_h - 8, "convergent (up) / divergent (down), per probe"))
    return _svg(width, 2 * mid + 30, body)


def heatmap_svg(rs: ReportSet) -> str:
    srcs = sorted({c.src_country for c in rs.heatmap})
    citms = sorted({c.citm_country for c in rs.heatmap})
    cell, left, top = 26, 40, 40
    body = []
    for i, c in enumerate(citms):
        body.append(_text(left + i * cell + cell / 2, top - 8, c, "middle"))
    for j, s in enumerate(srcs):
        body.append(_text(left - 6, top + j * cell + cell / 2 + 4, s, "end"))
    for c in rs.heatmap:
        x = left + citms.index(c.citm_country) * cell
        y = top + srcs.index(c.src_country) * cell
        shade = int(255 - 200 * c.fraction)
        body.append(
            f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb(255,{shade},{shade})" stroke="white"/>'
        )
        body.append(_text(x + cell / 2, y + cell / 2 + 4, fmt2(c.fraction)[1:] if c.fraction < 1 else "1", "middle",
                          ' font-size="8"'))
    return _svg(left + max(len(citms), 1) * cell + 20, top + max(len(srcs), 1) * cell + 20, body)


def cdf_svg(rs: ReportSet) -> str:
    left, top, w, h = 50, 20, 360, 220
    xmax = max([pts[-1][0] for pts in rs.cdf.values() if pts] + [1])
    body = [
        f'<line x1="{left}" y1="{top + h}" x2="{left + w}" y2="{top + h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + h}" stroke="black"/>',
        _text(left + w / 2, top + h + 30, "longest run of consecutive unlabeled hops", "middle"),
        _text(left - 8, top + 4, "1.0", "end"),
        _text(left - 8, top + h, "0.0", "end"),
    ]
    for i, country in enumerate(sorted(rs.cdf)):
        color = LINE_COLORS[i % len(LINE_COLORS)]
        pts = []
        prev_y = top + h
        for x, f in rs.cdf[country]:
            px = left + w * x / xmax
            py = top + h * (1 - f)
            pts.append(f"{fmt2(px)},{fmt2(prev_y)}")
            pts.append(f"{fmt2(px)},{fmt2(py)}")
            prev_y = py
        body.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="{color}"/>')
        body.append(_text(left + w + 8, top + 12 + 14 * i, country, extra=f' fill="{color}"'))
    return _svg(left + w + 60, top + h + 40, body)


def emit_svg(rs: ReportSet, out_dir: str) -> list[str]:
    written = []
    for name, render in (("banjo.svg", banjo_svg), ("heatmap.svg", heatmap_svg), ("unlabeled_cdf.svg", cdf_svg)):
        p = os.path.join(out_dir, name)
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(render(rs))
        written.append(p)
    return written

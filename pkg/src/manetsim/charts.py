"""Native SVG polyline charts from aggregated sweep results.

One chart per (metric, sweep cell group): x axis is node count, one polyline
per protocol of seed means with min-max whiskers.  CSV stays the canonical
output; these are conveniences mirroring the paper's graph layout.
"""

import math
import os

from .harness import NODE_COUNTS, PAUSE_VALUES, SPEED_VALUES, cell_means, read_metrics_csv
from .runner import PROTOCOLS

COLORS = {"dsdv": "#1f77b4", "aodv": "#d62728", "dsr": "#2ca02c", "zrp": "#9467bd"}
METRICS = ("throughput", "avg_delay_s", "dropped", "overhead")
METRIC_LABELS = {
    "throughput": "throughput (delivered/generated)",
    "avg_delay_s": "average delay (s)",
    "dropped": "dropped data packets",
    "overhead": "routing overhead (transmissions)",
}

W, H = 640, 420
ML, MR, MT, MB = 70, 20, 40, 50


def _ticks(vmax):
    if vmax <= 0 or math.isnan(vmax):
        vmax = 1.0
    raw = vmax / 4
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1, 2, 2.5, 5, 10):
        if raw <= mult * mag:
            step = mult * mag
            break
    top = step * math.ceil(vmax / step)
    n = round(top / step)
    return [i * step for i in range(n + 1)], top


def render_chart(title, xs, series):
    """series: protocol -> list of (mean, lo, hi) or None per x."""
    vmax = 0.0
    for pts in series.values():
        for p in pts:
            if p is not None and not math.isnan(p[2]):
                vmax = max(vmax, p[2])
    ticks, top = _ticks(vmax)
    px = {x: ML + (W - ML - MR) * i / (len(xs) - 1) for i, x in enumerate(xs)}

    def py(v):
        return MT + (H - MT - MB) * (1 - v / top)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>']
    for tv in ticks:
        y = py(tv)
        out.append(f'<line x1="{ML}" y1="{y:.1f}" x2="{W - MR}" y2="{y:.1f}" '
                   f'stroke="#ddd" stroke-width="1"/>')
        out.append(f'<text x="{ML - 6}" y="{y + 4:.1f}" text-anchor="end">{tv:g}</text>')
    for x in xs:
        out.append(f'<text x="{px[x]:.1f}" y="{H - MB + 18}" text-anchor="middle">{x}</text>')
    out.append(f'<line x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" '
               f'stroke="black" stroke-width="1"/>')
    out.append(f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" '
               f'stroke="black" stroke-width="1"/>')
    out.append(f'<text x="{(ML + W - MR) / 2:.0f}" y="{H - 10}" text-anchor="middle">'
               f'number of nodes</text>')

    for proto in PROTOCOLS:
        pts = series.get(proto)
        if pts is None:
            continue
        color = COLORS[proto]
        segment = []
        for x, p in zip(xs, pts):
            if p is None or math.isnan(p[0]):
                if len(segment) > 1:
                    path = " ".join(f"{a:.1f},{b:.1f}" for a, b in segment)
                    out.append(f'<polyline points="{path}" fill="none" '
                               f'stroke="{color}" stroke-width="2"/>')
                segment = []
                continue
            mean, lo, hi = p
            cx, cy = px[x], py(mean)
            segment.append((cx, cy))
            if hi > lo:
                out.append(f'<line x1="{cx:.1f}" y1="{py(lo):.1f}" x2="{cx:.1f}" '
                           f'y2="{py(hi):.1f}" stroke="{color}" stroke-width="1"/>')
            out.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="3" fill="{color}"/>')
        if len(segment) > 1:
            path = " ".join(f"{a:.1f},{b:.1f}" for a, b in segment)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" '
                       f'stroke-width="2"/>')
    for i, proto in enumerate(PROTOCOLS):
        lx = ML + 10 + i * 90
        out.append(f'<line x1="{lx}" y1="{MT - 8}" x2="{lx + 18}" y2="{MT - 8}" '
                   f'stroke="{COLORS[proto]}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 22}" y="{MT - 4}">{proto}</text>')
    out.append("</svg>")
    return "\n".join(out)


def emit_charts(csv_path, out_dir):
    """Write one SVG per (sweep group, metric) plus per-metric pivot CSVs.

    Returns the list of written chart paths; warns on stderr-style return of
    missing cells via the second element.
    """
    rows = read_metrics_csv(csv_path)
    if not rows:
        raise ValueError(f"no metric rows in {csv_path}")
    means = cell_means(rows)
    os.makedirs(out_dir, exist_ok=True)
    groups = [("pause", p) for p in PAUSE_VALUES] + [("speed", s) for s in SPEED_VALUES]
    xs = list(NODE_COUNTS)
    written = []
    missing = []
    for metric in METRICS:
        pivot_lines = ["sweep,value,nodes," + ",".join(PROTOCOLS)]
        for kind, value in groups:
            series = {}
            for proto in PROTOCOLS:
                pts = []
                for n in xs:
                    st = means.get(((kind, value, n), proto))
                    if st is None:
                        pts.append(None)
                        missing.append((kind, value, n, proto))
                    else:
                        pts.append(st[metric])
                series[proto] = pts
            for i, n in enumerate(xs):
                cells = []
                for proto in PROTOCOLS:
                    p = series[proto][i]
                    cells.append("" if p is None or math.isnan(p[0]) else f"{p[0]:.6g}")
                pivot_lines.append(f"{kind},{value:g},{n}," + ",".join(cells))
            title = f"{METRIC_LABELS[metric]}, {kind} {value:g}"
            svg = render_chart(title, xs, series)
            name = f"{metric}_{kind}{value:g}.svg"
            path = os.path.join(out_dir, name)
            with open(path, "w") as fh:
                fh.write(svg)
            written.append(path)
        with open(os.path.join(out_dir, f"pivot_{metric}.csv"), "w") as fh:
            fh.write("\n".join(pivot_lines) + "\n")
    return written, missing

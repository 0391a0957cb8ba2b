"""Minimal self-contained SVG charts for benchmark outputs."""

from __future__ import annotations

from xml.sax.saxutils import escape

W, H = 640, 400
ML, MR, MT, MB = 60, 180, 30, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _frame(title: str, xlabel: str, ylabel: str) -> list[str]:
    pw, ph = W - ML - MR, H - MT - MB
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{ML + pw / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{ML}" y1="{MT + ph}" x2="{ML + pw}" y2="{MT + ph}" stroke="black"/>',
        f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{MT + ph}" stroke="black"/>',
        f'<text x="{ML + pw / 2}" y="{H - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="15" y="{MT + ph / 2}" text-anchor="middle" transform="rotate(-90 15 {MT + ph / 2})">'
        f'{escape(ylabel)}</text>',
    ]
    for i in range(6):
        v = i / 5
        y = MT + ph * (1 - v)
        out.append(f'<line x1="{ML - 4}" y1="{y:.1f}" x2="{ML}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{ML - 8}" y="{y + 4:.1f}" text-anchor="end">{v:.1f}</text>')
    return out


def line_chart_svg(series: dict, title: str, xlabel: str, ylabel: str) -> str:
    """``series`` maps a label to a list of (x, y) points, y in [0, 1]."""
    pw, ph = W - ML - MR, H - MT - MB
    xs = sorted({x for pts in series.values() for x, _ in pts})
    lo, hi = (xs[0], xs[-1]) if xs else (0.0, 1.0)
    span = hi - lo or 1.0

    def sx(x):
        return ML + pw * (x - lo) / span

    def sy(y):
        return MT + ph * (1 - y)

    out = _frame(title, xlabel, ylabel)
    for x in xs:
        out.append(f'<text x="{sx(x):.1f}" y="{MT + ph + 16}" text-anchor="middle">{x:g}</text>')
    for i, (label, pts) in enumerate(sorted(series.items())):
        color = PALETTE[i % len(PALETTE)]
        pts = sorted(pts)
        path = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in pts:
            out.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="{color}"/>')
        ly = MT + 16 * i + 8
        x0 = W - MR + 10
        out.append(f'<line x1="{x0}" y1="{ly}" x2="{x0 + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - MR + 35}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_chart_svg(labels, values, ylabel: str, title: str = "") -> str:
    """Vertical bars for values in [0, 1]."""
    pw, ph = W - ML - MR, H - MT - MB
    out = _frame(title, "", ylabel)
    n = max(len(labels), 1)
    bw = pw / n
    for i, (label, v) in enumerate(zip(labels, values)):
        x = ML + i * bw + 0.15 * bw
        h = ph * max(0.0, min(1.0, v))
        out.append(f'<rect x="{x:.1f}" y="{MT + ph - h:.1f}" width="{0.7 * bw:.1f}" height="{h:.1f}" '
                   f'fill="{PALETTE[i % len(PALETTE)]}"/>')
        cx = x + 0.35 * bw
        out.append(f'<text x="{cx:.1f}" y="{MT + ph - h - 4:.1f}" text-anchor="middle">{v:.2f}</text>')
        out.append(f'<text x="{cx:.1f}" y="{MT + ph + 14}" text-anchor="end" font-size="10" '
                   f'transform="rotate(-30 {cx:.1f} {MT + ph + 14})">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def success_curves_svg(rows, criterion: str = "success") -> str:
    """Success rate against IoU level, one line per variant and scale."""
    key = {"success": "success_rate", "rot": "rot_rate", "trans": "trans_rate"}[criterion]
    series = {}
    for r in rows:
        if r["level"] == "all":
            continue
        label = f"{r['method']}:{r['param']} x{r['scale']}"
        series.setdefault(label, []).append((float(r["level"]), float(r[key])))
    names = {"success": "rotation and translation", "rot": "rotation only", "trans": "translation only"}
    return line_chart_svg(series, f"Success rate ({names[criterion]})", "3D IoU of initial pose", "success rate")

"""CSV tables and SVG charts for campaign results.

Output bytes are a pure function of the bundle: floats format through
one canonical formatter and the SVG is assembled from plain strings.
"""

from pathlib import Path

from .errors import IoFailure

TABLE_HEADERS = {
    "table1.csv": "fold,lr,batch,epochs,wer",
    "table2.csv": "fold,lr,batch,epochs,loss",
    "table3.csv": "lr,batch,epochs,mean_time_s",
    "table4.csv": "alpha,rank,mean_wer",
}

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_W, _H = 640, 400
_ML, _MR, _MT, _MB = 70, 160, 40, 50


def fnum(x) -> str:
    """Canonical number formatting for CSV cells and SVG coordinates."""
    if isinstance(x, int):
        return str(x)
    return f"{x:.6g}"


def _csv(rows) -> str:
    return "".join(",".join(fnum(v) for v in row) + "\n" for row in rows)


def line_chart_svg(title: str, xlabel: str, ylabel: str, series) -> str:
    """Categorical-x line chart: series is a sequence of
    (label, x_values, y_values); all series share the x grid."""
    xs = series[0][1]
    n = len(xs)
    all_y = [y for _, _, ys in series for y in ys]
    y_lo = min(0.0, min(all_y))
    y_hi = max(all_y) or 1.0
    span = (y_hi - y_lo) or 1.0
    y_hi += 0.05 * span
    plot_w = _W - _ML - _MR
    plot_h = _H - _MT - _MB

    def px(i):
        return _ML + (plot_w * (i / max(n - 1, 1)) if n > 1 else plot_w / 2)

    def py(v):
        return _MT + plot_h * (1 - (v - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W // 2}" y="22" text-anchor="middle" '
        f'font-size="15">{title}</text>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" '
        f'stroke="black"/>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" '
        f'stroke="black"/>',
        f'<text x="{_ML + plot_w / 2:.1f}" y="{_H - 12}" '
        f'text-anchor="middle">{xlabel}</text>',
        f'<text x="18" y="{_MT + plot_h / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {_MT + plot_h / 2:.1f})">{ylabel}</text>',
    ]
    for i, x in enumerate(xs):
        parts.append(
            f'<text x="{px(i):.1f}" y="{_H - _MB + 16}" '
            f'text-anchor="middle">{fnum(x)}</text>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = y_lo + frac * (y_hi - y_lo)
        parts.append(
            f'<text x="{_ML - 6}" y="{py(v):.1f}" text-anchor="end" '
            f'dominant-baseline="middle">{fnum(v)}</text>')
        parts.append(
            f'<line x1="{_ML}" y1="{py(v):.1f}" x2="{_W - _MR}" '
            f'y2="{py(v):.1f}" stroke="#dddddd"/>')
    for s_idx, (label, _, ys) in enumerate(series):
        color = _PALETTE[s_idx % len(_PALETTE)]
        points = " ".join(f"{px(i):.1f},{py(y):.1f}" for i, y in enumerate(ys))
        parts.append(f'<polyline points="{points}" fill="none" '
                     f'stroke="{color}" stroke-width="2"/>')
        for i, y in enumerate(ys):
            parts.append(f'<circle cx="{px(i):.1f}" cy="{py(y):.1f}" r="3" '
                         f'fill="{color}"/>')
        ly = _MT + 14 + 18 * s_idx
        parts.append(f'<line x1="{_W - _MR + 10}" y1="{ly}" '
                     f'x2="{_W - _MR + 30}" y2="{ly}" stroke="{color}" '
                     f'stroke-width="2"/>')
        parts.append(f'<text x="{_W - _MR + 35}" y="{ly + 4}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(bundle, out_dir) -> tuple[list, list]:
    """Write table1-4 CSVs and fig1-3 SVGs into out_dir. Returns
    (written paths, warnings); empty figure series produce a warning
    instead of a file."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    written = []
    warnings = []

    tables = {
        "table1.csv": bundle.table1,
        "table2.csv": bundle.table2,
        "table3.csv": bundle.table3,
        "table4.csv": bundle.table4,
    }
    try:
        for name, rows in tables.items():
            path = out / name
            path.write_text(TABLE_HEADERS[name] + "\n" + _csv(rows))
            written.append(path)

        figures = {
            "fig1.svg": ("Average WER vs learning rate", "learning rate",
                         "mean WER", bundle.fig1),
            "fig2.svg": ("Average loss vs learning rate", "learning rate",
                         "mean eval loss", bundle.fig2),
            "fig3.svg": ("Average training time vs learning rate",
                         "learning rate", "mean seconds", bundle.fig3),
        }
        for name, (title, xl, yl, series) in figures.items():
            if not series:
                warnings.append(f"{name}: no series to plot, skipped")
                continue
            path = out / name
            path.write_text(line_chart_svg(title, xl, yl, series))
            written.append(path)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return written, warnings

"""Minimal static SVG output: heatmaps, paired histograms, grouped bars.

Hand-rolled on purpose so figures carry no plotting-library dependence and
are byte-deterministic for identical inputs.
"""

from __future__ import annotations

import numpy as np


def _fmt(value: float) -> str:
    return f"{float(value):.6g}"


def _diverging_color(value: float, limit: float) -> str:
    """Blue-white-red ramp centered at zero over [-limit, limit]."""
    if limit <= 0:
        t = 0.0
    else:
        t = max(-1.0, min(1.0, value / limit))
    if t >= 0:
        r, g, b = 255, int(round(255 * (1 - t))), int(round(255 * (1 - t)))
    else:
        r, g, b = int(round(255 * (1 + t))), int(round(255 * (1 + t))), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def _document(width: int, height: int, body: list, title: str) -> str:
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def svg_heatmap(matrix: np.ndarray, path, title: str = "",
                vmax: float | None = None, cell: int = 4) -> None:
    """Square heatmap with a diverging palette centered at zero.

    Pass ``vmax`` to pin the colour scale; sharing one value across figures
    puts them on a common scale.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    limit = float(np.abs(matrix).max()) if vmax is None else float(vmax)
    margin, top = 20, 30
    width = n * cell + 2 * margin + 60
    height = n * cell + top + margin
    body = []
    for i in range(n):
        for j in range(n):
            color = _diverging_color(matrix[i, j], limit)
            body.append(
                f'<rect x="{margin + j * cell}" y="{top + i * cell}" width="{cell}" '
                f'height="{cell}" fill="{color}" shape-rendering="crispEdges"/>'
            )
    bar_x = margin + n * cell + 14
    steps = 32
    bar_h = n * cell
    for s in range(steps):
        value = limit * (1 - 2 * s / (steps - 1))
        body.append(
            f'<rect x="{bar_x}" y="{top + s * bar_h / steps:.1f}" width="10" '
            f'height="{bar_h / steps + 0.5:.1f}" fill="{_diverging_color(value, limit)}"/>'
        )
    body.append(f'<text x="{bar_x + 14}" y="{top + 8}" font-family="sans-serif" '
                f'font-size="9">{_fmt(limit)}</text>')
    body.append(f'<text x="{bar_x + 14}" y="{top + bar_h}" font-family="sans-serif" '
                f'font-size="9">{_fmt(-limit)}</text>')
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write(_document(width, height, body, title))


def svg_histogram_pair(values_a, values_b, path, label_a: str = "stable",
                       label_b: str = "volatile", title: str = "",
                       bins: int = 24) -> None:
    """Two overlaid histograms on a shared binning."""
    values_a = np.asarray(values_a, dtype=float)
    values_b = np.asarray(values_b, dtype=float)
    pooled = np.concatenate([values_a, values_b]) if values_a.size + values_b.size else np.array([0.0])
    lo, hi = float(pooled.min()), float(pooled.max())
    if lo == hi:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    counts_a, _ = np.histogram(values_a, bins=edges)
    counts_b, _ = np.histogram(values_b, bins=edges)
    peak = max(1, counts_a.max(initial=0), counts_b.max(initial=0))

    width, height, margin, top = 480, 280, 45, 40
    plot_w, plot_h = width - 2 * margin, height - top - margin
    body = []
    for counts, color in ((counts_a, "#4477cc"), (counts_b, "#cc5544")):
        for k in range(bins):
            if counts[k] == 0:
                continue
            h = plot_h * counts[k] / peak
            x = margin + plot_w * k / bins
            body.append(
                f'<rect x="{x:.1f}" y="{top + plot_h - h:.1f}" '
                f'width="{plot_w / bins - 1:.1f}" height="{h:.1f}" '
                f'fill="{color}" fill-opacity="0.55"/>'
            )
    body.append(f'<line x1="{margin}" y1="{top + plot_h}" x2="{margin + plot_w}" '
                f'y2="{top + plot_h}" stroke="black"/>')
    body.append(f'<text x="{margin}" y="{height - 8}" font-family="sans-serif" '
                f'font-size="10">{_fmt(lo)}</text>')
    body.append(f'<text x="{margin + plot_w}" y="{height - 8}" text-anchor="end" '
                f'font-family="sans-serif" font-size="10">{_fmt(hi)}</text>')
    body.append(f'<rect x="{width - 150}" y="28" width="10" height="10" fill="#4477cc" '
                f'fill-opacity="0.55"/><text x="{width - 136}" y="37" '
                f'font-family="sans-serif" font-size="10">{label_a}</text>')
    body.append(f'<rect x="{width - 150}" y="42" width="10" height="10" fill="#cc5544" '
                f'fill-opacity="0.55"/><text x="{width - 136}" y="51" '
                f'font-family="sans-serif" font-size="10">{label_b}</text>')
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write(_document(width, height, body, title))


def svg_grouped_bars(groups, metrics, means, stderrs, path, title: str = "") -> None:
    """Grouped bar chart with error bars.

    ``means[group][metric]`` and ``stderrs[group][metric]`` hold the bar
    heights (expected in [0, 1]) and half-lengths of the error bars.
    """
    palette = ["#4477cc", "#cc5544", "#44aa77", "#aa7744", "#7755aa", "#558899"]
    width, height, margin, top = 640, 320, 50, 40
    plot_w, plot_h = width - 2 * margin, height - top - margin
    group_w = plot_w / max(1, len(groups))
    bar_w = group_w / (len(metrics) + 1)
    body = []
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = top + plot_h * (1 - tick)
        body.append(f'<line x1="{margin}" y1="{y:.1f}" x2="{margin + plot_w}" '
                    f'y2="{y:.1f}" stroke="#dddddd"/>')
        body.append(f'<text x="{margin - 6}" y="{y + 3:.1f}" text-anchor="end" '
                    f'font-family="sans-serif" font-size="9">{_fmt(tick)}</text>')
    for gi, group in enumerate(groups):
        for mi, metric in enumerate(metrics):
            value = float(means[group][metric])
            err = float(stderrs[group][metric])
            x = margin + gi * group_w + (mi + 0.5) * bar_w
            h = plot_h * max(0.0, min(1.0, value))
            y = top + plot_h - h
            body.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w - 2:.1f}" '
                        f'height="{h:.1f}" fill="{palette[mi % len(palette)]}"/>')
            cx = x + (bar_w - 2) / 2
            y_lo = top + plot_h * (1 - max(0.0, value - err))
            y_hi = top + plot_h * (1 - min(1.0, value + err))
            body.append(f'<line x1="{cx:.1f}" y1="{y_lo:.1f}" x2="{cx:.1f}" '
                        f'y2="{y_hi:.1f}" stroke="black"/>')
        body.append(f'<text x="{margin + gi * group_w + group_w / 2:.1f}" '
                    f'y="{height - 12}" text-anchor="middle" font-family="sans-serif" '
                    f'font-size="11">{group}</text>')
    for mi, metric in enumerate(metrics):
        body.append(f'<rect x="{margin + mi * 110}" y="24" width="10" height="10" '
                    f'fill="{palette[mi % len(palette)]}"/>')
        body.append(f'<text x="{margin + mi * 110 + 14}" y="33" '
                    f'font-family="sans-serif" font-size="10">{metric}</text>')
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write(_document(width, height, body, title))

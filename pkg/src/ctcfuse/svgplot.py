"""Minimal static SVG 1.1 emission: enough for accuracy curves and
per-unit timing charts without a plotting runtime."""

from pathlib import Path

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _svg_header(width, height, title):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="14">{title}</text>\n'
    )


def line_chart(path, series, x_label="", y_label="", title=""):
    """series: {name: [(x, y), ...]}; one polyline + markers per name."""
    width, height = 640, 420
    left, right, top, bottom = 70, 150, 40, 50
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * (width - left - right)

    def sy(y):
        return height - bottom - (y - y_lo) / (y_hi - y_lo) * (height - top - bottom)

    out = [_svg_header(width, height, title)]
    out.append(
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" '
        f'y2="{height - bottom}" stroke="black"/>\n'
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>\n'
        f'<text x="{(width - right + left) / 2}" y="{height - 12}" text-anchor="middle" '
        f'font-size="12">{x_label}</text>\n'
        f'<text x="16" y="{(height - bottom + top) / 2}" font-size="12" '
        f'transform="rotate(-90 16 {(height - bottom + top) / 2})" '
        f'text-anchor="middle">{y_label}</text>\n'
    )
    for tick in range(5):
        yv = y_lo + tick * (y_hi - y_lo) / 4
        out.append(
            f'<text x="{left - 6}" y="{sy(yv) + 4}" text-anchor="end" font-size="10">'
            f"{yv:.1f}</text>\n"
        )
        xv = x_lo + tick * (x_hi - x_lo) / 4
        out.append(
            f'<text x="{sx(xv)}" y="{height - bottom + 16}" text-anchor="middle" '
            f'font-size="10">{xv:.1f}</text>\n'
        )
    for idx, (name, pts) in enumerate(series.items()):
        color = PALETTE[idx % len(PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in sorted(pts))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>\n')
        for x, y in pts:
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>\n')
        ly = top + 16 * idx
        out.append(
            f'<rect x="{width - right + 10}" y="{ly - 8}" width="10" height="10" fill="{color}"/>\n'
            f'<text x="{width - right + 24}" y="{ly + 1}" font-size="11">{name}</text>\n'
        )
    out.append("</svg>\n")
    Path(path).write_text("".join(out))


def timing_rows(path, rows, systems, x_label="time (ms)", title=""):
    """rows: {row_label: {system: x_value}}; one circle mark per present value."""
    width = 640
    left, right, top = 110, 150, 40
    row_h = 22
    height = top + row_h * (len(rows) + 1) + 40
    xs = [v for marks in rows.values() for v in marks.values()]
    if not xs:
        xs = [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * (width - left - right)

    out = [_svg_header(width, height, title)]
    color_of = {s: PALETTE[i % len(PALETTE)] for i, s in enumerate(systems)}
    for idx, s in enumerate(systems):
        ly = top + 16 * idx
        out.append(
            f'<rect x="{width - right + 10}" y="{ly - 8}" width="10" height="10" '
            f'fill="{color_of[s]}"/>\n'
            f'<text x="{width - right + 24}" y="{ly + 1}" font-size="11">{s}</text>\n'
        )
    base = top + 20
    for r, (label, marks) in enumerate(rows.items()):
        cy = base + r * row_h
        out.append(
            f'<text x="{left - 8}" y="{cy + 4}" text-anchor="end" font-size="11">{label}</text>\n'
            f'<line x1="{left}" y1="{cy}" x2="{width - right}" y2="{cy}" '
            f'stroke="#dddddd"/>\n'
        )
        for s in systems:
            if s in marks:
                out.append(
                    f'<circle cx="{sx(marks[s]):.2f}" cy="{cy}" r="5" '
                    f'fill="{color_of[s]}" fill-opacity="0.8"/>\n'
                )
    axis_y = base + len(rows) * row_h
    out.append(f'<line x1="{left}" y1="{axis_y}" x2="{width - right}" y2="{axis_y}" stroke="black"/>\n')
    for tick in range(5):
        xv = x_lo + tick * (x_hi - x_lo) / 4
        out.append(
            f'<text x="{sx(xv)}" y="{axis_y + 16}" text-anchor="middle" font-size="10">'
            f"{xv:.0f}</text>\n"
        )
    out.append(
        f'<text x="{(width - right + left) / 2}" y="{axis_y + 32}" text-anchor="middle" '
        f'font-size="12">{x_label}</text>\n'
    )
    out.append("</svg>\n")
    Path(path).write_text("".join(out))

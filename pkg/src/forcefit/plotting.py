"""Standalone SVG plots of trajectories against the scoring bands."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

from .trajectory import TargetSpec, Trajectory

WIDTH, HEIGHT = 720, 440
MARGIN = 50
COLORS = ("#222222", "#2a9d8f", "#e9c46a", "#8e44ad", "#f4a261")
TWO_PT_COLOR = "#1f77b4"
THREE_PT_COLOR = "#d62728"


def _nice_step(span: float) -> float:
    raw = span / 8
    mag = 10 ** math.floor(math.log10(raw))
    for f in (1, 2, 5, 10):
        if raw <= f * mag:
            return f * mag
    return 10 * mag


def trajectory_svg(
    trajectories,
    distance: float,
    target: TargetSpec,
    floor_y: float,
    title: str = "",
) -> str:
    """Render ``trajectories`` (a Trajectory or list of ``(Trajectory, label)``) as SVG text.

    The target plane at ``distance`` carries the 2-point band in blue and the
    3-point band in red; y is measured from the launch exit point.
    """
    if isinstance(trajectories, Trajectory):
        trajectories = [(trajectories, "")]
    xs = [distance] + [float(t.x.max()) for t, _ in trajectories]
    ys = [floor_y, target.center_height + target.two_pt_halfwidth] + [float(t.y.max()) for t, _ in trajectories]
    x_lo, x_hi = 0.0, max(xs) * 1.05
    y_lo, y_hi = min(ys), (max(ys) * 1.1 if max(ys) > 0 else 1.0)
    plot_w, plot_h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return MARGIN + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>')

    # axes and ticks
    out.append(
        f'<polyline points="{MARGIN},{MARGIN} {MARGIN},{HEIGHT - MARGIN} {WIDTH - MARGIN},{HEIGHT - MARGIN}" '
        'fill="none" stroke="black"/>'
    )
    step = _nice_step(x_hi - x_lo)
    x = 0.0
    while x <= x_hi:
        out.append(f'<line x1="{px(x):.1f}" y1="{HEIGHT - MARGIN}" x2="{px(x):.1f}" y2="{HEIGHT - MARGIN + 4}" stroke="black"/>')
        out.append(f'<text x="{px(x):.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{x:g}</text>')
        x += step
    step = _nice_step(y_hi - y_lo)
    y = math.ceil(y_lo / step) * step
    while y <= y_hi:
        out.append(f'<line x1="{MARGIN - 4}" y1="{py(y):.1f}" x2="{MARGIN}" y2="{py(y):.1f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN - 6}" y="{py(y) + 4:.1f}" text-anchor="end">{y:g}</text>')
        y += step
    out.append(f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">x (m)</text>')
    out.append(
        f'<text x="14" y="{HEIGHT / 2:.1f}" text-anchor="middle" transform="rotate(-90 14 {HEIGHT / 2:.1f})">'
        "y above launch exit (m)</text>"
    )

    # floor, scoring bands, launch point
    out.append(
        f'<line x1="{px(x_lo):.1f}" y1="{py(floor_y):.1f}" x2="{px(x_hi):.1f}" y2="{py(floor_y):.1f}" '
        'stroke="#999999" stroke-dasharray="4 3"/>'
    )
    c = target.center_height
    for half, color, width in (
        (target.two_pt_halfwidth, TWO_PT_COLOR, 6),
        (target.three_pt_halfwidth, THREE_PT_COLOR, 6),
    ):
        out.append(
            f'<line x1="{px(distance):.1f}" y1="{py(c - half):.1f}" x2="{px(distance):.1f}" '
            f'y2="{py(c + half):.1f}" stroke="{color}" stroke-width="{width}"/>'
        )
    out.append(f'<text x="{px(0) + 6:.1f}" y="{py(0) - 6:.1f}">*</text>')

    for i, (traj, label) in enumerate(trajectories):
        color = COLORS[i % len(COLORS)]
        points = " ".join(f"{px(xv):.2f},{py(yv):.2f}" for xv, yv in zip(traj.x.tolist(), traj.y.tolist()))
        out.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if label:
            out.append(f'<text x="{WIDTH - MARGIN - 4}" y="{MARGIN + 14 * (i + 1)}" text-anchor="end" fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_trajectory_svg(path, trajectories, distance, target, floor_y, title=""):
    with open(path, "w") as fh:
        fh.write(trajectory_svg(trajectories, distance, target, floor_y, title))

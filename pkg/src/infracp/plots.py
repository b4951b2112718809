"""Hand-written SVG output: AP-vs-noise line charts and BEV scene snapshots."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .geometry import OrientedBox3D
from .scene import AgentKind, Scene

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _svg(width: float, height: float, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
            f'viewBox="0 0 {width:.0f} {height:.0f}">')
    return "\n".join([head, f'<rect width="100%" height="100%" fill="white"/>', *body, "</svg>"]) + "\n"


def noise_chart(series: dict[str, Sequence[float | None]], title: str = "AP@0.7 vs noise level",
                width: int = 480, height: int = 320) -> str:
    """Line chart with one polyline per series over levels 0..n-1.

    Missing values (None) break the line.
    """
    left, right, top, bottom = 56, 110, 34, 44
    pw, ph = width - left - right, height - top - bottom
    n = max((len(v) for v in series.values()), default=1)

    def px(i: int) -> float:
        return left + (pw * i / (n - 1) if n > 1 else pw / 2)

    def py(v: float) -> float:
        return top + ph * (1.0 - v)

    body = [f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-family="sans-serif" '
            f'font-size="14">{escape(title)}</text>',
            f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for k in range(6):
        v = k / 5
        body.append(f'<line x1="{left}" y1="{py(v):.1f}" x2="{left + pw}" y2="{py(v):.1f}" stroke="#ddd"/>')
        body.append(f'<text x="{left - 6}" y="{py(v) + 4:.1f}" text-anchor="end" font-family="sans-serif" '
                    f'font-size="11">{v:.1f}</text>')
    for i in range(n):
        body.append(f'<text x="{px(i):.1f}" y="{top + ph + 16}" text-anchor="middle" font-family="sans-serif" '
                    f'font-size="11">{i}</text>')
    body.append(f'<text x="{left + pw / 2:.0f}" y="{height - 8}" text-anchor="middle" font-family="sans-serif" '
                f'font-size="12">noise level</text>')
    for s, (name, vals) in enumerate(series.items()):
        color = PALETTE[s % len(PALETTE)]
        runs, cur = [], []
        for i, v in enumerate(vals):
            if v is None:
                if cur:
                    runs.append(cur)
                cur = []
            else:
                cur.append((px(i), py(v)))
        if cur:
            runs.append(cur)
        for run in runs:
            pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in run)
            body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
            body += [f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="{color}"/>' for x, y in run]
        ly = top + 16 + 18 * s
        body.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" '
                    f'stroke="{color}" stroke-width="2"/>')
        body.append(f'<text x="{left + pw + 38}" y="{ly + 4}" font-family="sans-serif" '
                    f'font-size="12">{escape(name)}</text>')
    return _svg(width, height, body)


def _box_path(b: OrientedBox3D, tx, ty) -> str:
    c, s = np.cos(b.yaw), np.sin(b.yaw)
    hl, hw = b.l / 2, b.w / 2
    pts = [(b.x + c * dx - s * dy, b.y + s * dx + c * dy)
           for dx, dy in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw))]
    return " ".join(f"{tx(x):.1f},{ty(y):.1f}" for x, y in pts)


def render_scene(scene: Scene, frame: int = 0, clouds: dict[str, np.ndarray] | None = None,
                 detections: Sequence[OrientedBox3D] = (), scale: float = 3.0, margin: float = 10.0,
                 max_points: int = 4000) -> str:
    """Bird's-eye view of one frame.

    Parameters
    ----------
    clouds : dict of str to (N, 3) array, optional
        World-frame points keyed by agent id; drawn in the agent's colour.
    detections : sequence of OrientedBox3D
        World-frame predicted boxes, drawn dashed.
    max_points : int
        Each cloud is strided down to roughly this many points.
    """
    scene._check_frame(frame)
    fr = scene.frames[frame]
    boxes = list(scene.occluders) + list(fr.actors)
    xs = [b.x for b in boxes] + [p.x for p in fr.agent_poses]
    ys = [b.y for b in boxes] + [p.y for p in fr.agent_poses]
    pad = 15.0
    x0, x1 = min(xs) - pad, max(xs) + pad
    y0, y1 = min(ys) - pad, max(ys) + pad
    width = (x1 - x0) * scale + 2 * margin
    height = (y1 - y0) * scale + 2 * margin

    def tx(x):
        return margin + (x - x0) * scale

    def ty(y):
        return margin + (y1 - y) * scale

    body = [f'<polygon points="{_box_path(b, tx, ty)}" fill="#bbb" stroke="#888"/>' for b in scene.occluders]
    colors = {a.agent_id: PALETTE[k % len(PALETTE)] for k, a in enumerate(scene.agents)}
    for aid, pts in (clouds or {}).items():
        pts = np.asarray(pts)
        step = max(1, len(pts) // max_points)
        c = colors.get(aid, "#000")
        body += [f'<circle cx="{tx(x):.1f}" cy="{ty(y):.1f}" r="0.6" fill="{c}" fill-opacity="0.5"/>'
                 for x, y in pts[::step, :2]]
    body += [f'<polygon points="{_box_path(b, tx, ty)}" fill="none" stroke="#2ca02c" stroke-width="1.2"/>'
             for b in fr.actors]
    body += [f'<polygon points="{_box_path(b, tx, ty)}" fill="none" stroke="#d62728" stroke-width="1.2" '
             f'stroke-dasharray="3,2"/>' for b in detections]
    for a, p in zip(scene.agents, fr.agent_poses):
        shape = "rect" if a.kind is AgentKind.INFRASTRUCTURE else "circle"
        c = colors[a.agent_id]
        if shape == "rect":
            body.append(f'<rect x="{tx(p.x) - 5:.1f}" y="{ty(p.y) - 5:.1f}" width="10" height="10" fill="{c}"/>')
        else:
            body.append(f'<circle cx="{tx(p.x):.1f}" cy="{ty(p.y):.1f}" r="5" fill="{c}"/>')
        body.append(f'<text x="{tx(p.x) + 7:.1f}" y="{ty(p.y) - 7:.1f}" font-family="sans-serif" '
                    f'font-size="12" fill="{c}">{escape(a.agent_id)}</text>')
    body.append(f'<text x="{margin}" y="{margin + 12}" font-family="sans-serif" font-size="12">'
                f'{escape(scene.scene_id)} frame {frame}</text>')
    return _svg(width, height, body)

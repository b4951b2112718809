"""Convex polygon helpers shared by the geometry module and the numpy kernels."""

from __future__ import annotations

import math

Point2 = tuple[float, float]


def rect_corners(x: float, y: float, w: float, l: float, yaw: float) -> list[Point2]:
    """Counter-clockwise BEV corners; ``l`` runs along the heading, ``w`` across it."""
    c, s = math.cos(yaw), math.sin(yaw)
    hl, hw = 0.5 * l, 0.5 * w
    out = []
    for dx, dy in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)):
        out.append((x + c * dx - s * dy, y + s * dx + c * dy))
    return out


def shoelace(poly: list[Point2]) -> float:
    n = len(poly)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return 0.5 * acc


def clip_convex(subject: list[Point2], clip: list[Point2]) -> list[Point2]:
    """Sutherland-Hodgman: part of ``subject`` inside the CCW convex ``clip``."""
    out = subject
    n = len(clip)
    for i in range(n):
        if len(out) < 3:
            return []
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        inp = out
        out = []
        m = len(inp)
        for j in range(m):
            px, py = inp[j]
            qx, qy = inp[(j + 1) % m]
            sp = ex * (py - ay) - ey * (px - ax)
            sq = ex * (qy - ay) - ey * (qx - ax)
            if sp >= 0.0:
                out.append((px, py))
            if (sp >= 0.0) != (sq >= 0.0):
                t = sp / (sp - sq)
                out.append((px + t * (qx - px), py + t * (qy - py)))
    return out


def rect_iou(a: tuple[float, ...], b: tuple[float, ...]) -> float:
    """IoU of two BEV rectangles given as ``(x, y, w, l, yaw)``."""
    area_a = a[2] * a[3]
    area_b = b[2] * b[3]
    reach = 0.5 * (math.hypot(a[2], a[3]) + math.hypot(b[2], b[3]))
    if math.hypot(a[0] - b[0], a[1] - b[1]) >= reach:
        return 0.0
    inter = shoelace(clip_convex(rect_corners(*a), rect_corners(*b)))
    if inter <= 0.0:
        return 0.0
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def convex_hull(points: list[Point2]) -> list[Point2]:
    """Andrew's monotone chain; CCW, no repeated endpoint, collinear points dropped."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[Point2] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point2] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]

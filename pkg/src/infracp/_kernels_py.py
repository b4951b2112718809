"""Pure numpy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_kernels`` extension; used when
the extension is not built or when ``INFRACP_NO_EXT=1``.
"""

from __future__ import annotations

import numpy as np

from . import _polygon

NO_HIT = -2
GROUND_HIT = -1


def cast_rays(origin, dirs, boxes, exclude=-1, ground=True, max_range=np.inf):
    """First hit of every ray from a shared ``origin``.

    Parameters
    ----------
    origin : (3,) float64
    dirs : (N, 3) float64 unit directions
    boxes : (M, 7) float64 rows ``[x, y, z, w, l, h, yaw]``
    exclude : int
        Box index to ignore (the sensing agent's own body), -1 for none.
    ground : bool
        Whether the plane z = 0 is a hit surface.
    max_range : float

    Returns
    -------
    dist : (N,) float64, ``inf`` where nothing is hit within ``max_range``
    hit : (N,) int64, box index, ``GROUND_HIT`` or ``NO_HIT``
    """
    origin = np.asarray(origin, dtype=np.float64)
    dirs = np.asarray(dirs, dtype=np.float64)
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 7)
    n = dirs.shape[0]
    best = np.full(n, np.inf)
    hit = np.full(n, NO_HIT, dtype=np.int64)

    if ground and origin[2] > 0.0:
        dz = dirs[:, 2]
        down = dz < 0.0
        tg = np.full(n, np.inf)
        tg[down] = -origin[2] / dz[down]
        sel = tg < best
        best[sel] = tg[sel]
        hit[sel] = GROUND_HIT

    for k in range(boxes.shape[0]):
        if k == exclude:
            continue
        x, y, z, w, l, h, yaw = boxes[k]
        c, s = np.cos(yaw), np.sin(yaw)
        ox, oy, oz = origin[0] - x, origin[1] - y, origin[2] - z
        lo = np.array([c * ox + s * oy, -s * ox + c * oy, oz])
        ld = np.empty_like(dirs)
        ld[:, 0] = c * dirs[:, 0] + s * dirs[:, 1]
        ld[:, 1] = -s * dirs[:, 0] + c * dirs[:, 1]
        ld[:, 2] = dirs[:, 2]
        half = np.array([0.5 * l, 0.5 * w, 0.5 * h])
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-half - lo) / ld
            t2 = (half - lo) / ld
        tmin = np.minimum(t1, t2)
        tmax = np.maximum(t1, t2)
        # parallel to a slab: inside => unbounded, outside => miss
        par = ld == 0.0
        if par.any():
            inside = np.abs(lo) <= half
            tmin = np.where(par, np.where(inside, -np.inf, np.inf), tmin)
            tmax = np.where(par, np.where(inside, np.inf, -np.inf), tmax)
        t_near = tmin.max(axis=1)
        t_far = tmax.min(axis=1)
        ok = (t_near <= t_far) & (t_far >= 0.0)
        t = np.where(t_near >= 0.0, t_near, t_far)
        sel = ok & (t < best)
        best[sel] = t[sel]
        hit[sel] = k

    far = best > max_range
    best[far] = np.inf
    hit[far] = NO_HIT
    return best, hit


def iou_matrix(a, b):
    """Pairwise BEV IoU of ``(N, 5)`` and ``(M, 5)`` rows ``[x, y, w, l, yaw]``."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 5)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 5)
    out = np.zeros((a.shape[0], b.shape[0]))
    if out.size == 0:
        return out
    ra = 0.5 * np.hypot(a[:, 2], a[:, 3])
    rb = 0.5 * np.hypot(b[:, 2], b[:, 3])
    dist = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    for i, j in zip(*np.nonzero(dist < ra[:, None] + rb[None, :])):
        out[i, j] = _polygon.rect_iou(tuple(a[i]), tuple(b[j]))
    return out

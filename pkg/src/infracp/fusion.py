"""BEV feature extraction, multi-agent fusion, and a geometric detection head.

Features are occupancy grids: each point inside the detection range adds one
to its cell. Grids from several agents are fused cell-wise and the detector
turns connected occupied regions into oriented vehicle boxes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from ._polygon import convex_hull
from .geometry import Label, OrientedBox3D, Pose, nms, transform_box
from .scene import CATALOG, AgentKind, VehicleType

RESOLUTION = 0.4
GROUND_BAND = 0.15
MIN_CLUSTER_CELLS = 4
CONFIDENCE_SCALE = 20.0

# catalog matching slack (meters) for observed footprint and height; the
# footprint slack grows by one cell diagonal's worth for rotated staircases
EXTENT_TOL = 0.5
HEIGHT_TOL = 0.25
# slack below the catalog size at which a side still counts as fully observed
FULL_SPAN_TOL = 0.0
# visible faces sit this far inside the outer edge of their cells on average
FACE_INSET = 0.1
# components taller than this are structure, not vehicles
MAX_VEHICLE_HEIGHT = 4.0
# rectangles within this fraction of the minimum area compete on edge closeness
AREA_SLACK = 0.3
# completed boxes overlapping a stronger one this much are the same vehicle
DUPLICATE_IOU = 0.2


class RangeShape(str, enum.Enum):
    RECTANGLE = "Rectangle"
    SQUARE = "Square"


@dataclass(frozen=True)
class DetectionRange:
    """Axis-aligned ego-frame region in which objects are sensed and scored."""

    x: tuple[float, float]
    y: tuple[float, float]
    z: tuple[float, float]
    shape_tag: RangeShape

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape_tag", RangeShape(self.shape_tag))
        for lo, hi in (self.x, self.y, self.z):
            if not lo < hi:
                raise ValueError(f"empty interval ({lo}, {hi})")
        if self.shape_tag is RangeShape.SQUARE and not math.isclose(
                self.x[1] - self.x[0], self.y[1] - self.y[0]):
            raise ValueError("a square range needs equal x and y extents")

    def contains(self, x: float, y: float, z: float | None = None) -> bool:
        ok = self.x[0] <= x <= self.x[1] and self.y[0] <= y <= self.y[1]
        if z is not None:
            ok = ok and self.z[0] <= z <= self.z[1]
        return ok

    def mask(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points).reshape(-1, 3)
        return ((p[:, 0] >= self.x[0]) & (p[:, 0] <= self.x[1])
                & (p[:, 1] >= self.y[0]) & (p[:, 1] <= self.y[1])
                & (p[:, 2] >= self.z[0]) & (p[:, 2] <= self.z[1]))

    def shape(self, resolution: float) -> tuple[int, int]:
        """Grid cells along x and y."""
        return (_cells(self.x[1] - self.x[0], resolution), _cells(self.y[1] - self.y[0], resolution))

    def to_dict(self) -> dict:
        return {"x": list(self.x), "y": list(self.y), "z": list(self.z), "shape_tag": self.shape_tag.value}

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionRange":
        return cls(tuple(d["x"]), tuple(d["y"]), tuple(d["z"]), RangeShape(d["shape_tag"]))

    @classmethod
    def preset(cls, regime: str, ego_kind: AgentKind | str, shape: RangeShape | str | None = None
               ) -> "DetectionRange":
        """Standard ranges for a data regime and ego agent kind.

        ``v2xset``: vehicles default to the 281.6 x 76.8 m rectangle and
        infrastructure to the 153.6 m square; either shape may be forced while
        keeping the ego kind's z-interval. ``v2xsim``: a 64 m square for both.
        """
        kind = AgentKind(ego_kind)
        if regime == "v2xset":
            z = (-3.0, 1.0) if kind is AgentKind.VEHICLE else (-5.0, -1.0)
            if shape is None:
                shape = RangeShape.RECTANGLE if kind is AgentKind.VEHICLE else RangeShape.SQUARE
            shape = RangeShape(shape)
            if shape is RangeShape.RECTANGLE:
                return cls((-140.8, 140.8), (-38.4, 38.4), z, shape)
            return cls((-76.8, 76.8), (-76.8, 76.8), z, shape)
        if regime == "v2xsim":
            if shape is not None and RangeShape(shape) is not RangeShape.SQUARE:
                raise ValueError("the v2xsim regime only defines a square range")
            z = (-3.0, 2.0) if kind is AgentKind.VEHICLE else (-8.5, -3.5)
            return cls((-32.0, 32.0), (-32.0, 32.0), z, RangeShape.SQUARE)
        raise ValueError(f"unknown regime {regime!r}")


def _cells(extent: float, resolution: float) -> int:
    # tolerate float noise such as 281.6 / 0.4 = 703.9999999
    return int(math.ceil(extent / resolution - 1e-9))


@dataclass(frozen=True, eq=False)
class BevGrid:
    """Occupancy feature over a detection range.

    Attributes
    ----------
    cells : ndarray, shape (nx, ny)
        Accumulated point weight per cell, indexed ``[ix, iy]``.
    height : ndarray, shape (nx, ny)
        Highest point above the ground in each cell (0 where empty).
    ground_z : float
        Ego-frame z of the ground plane.
    """

    range: DetectionRange
    resolution: float
    cells: np.ndarray
    height: np.ndarray
    ground_z: float

    def __post_init__(self) -> None:
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        shape = self.range.shape(self.resolution)
        if self.cells.shape != shape or self.height.shape != shape:
            raise ValueError(f"grid arrays must have shape {shape}")
        if not (np.isfinite(self.cells).all() and (self.cells >= 0).all()):
            raise ValueError("cell weights must be finite and non-negative")

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def cell_center(self, ix, iy):
        return (self.range.x[0] + (np.asarray(ix) + 0.5) * self.resolution,
                self.range.y[0] + (np.asarray(iy) + 0.5) * self.resolution)

    def same_layout(self, other: "BevGrid") -> bool:
        return (self.range == other.range and self.resolution == other.resolution
                and self.ground_z == other.ground_z)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BevGrid):
            return NotImplemented
        return (self.same_layout(other) and np.array_equal(self.cells, other.cells)
                and np.array_equal(self.height, other.height))

    __hash__ = None  # type: ignore[assignment]


def extract(points: np.ndarray, range_: DetectionRange, resolution: float = RESOLUTION,
            ground_z: float = 0.0) -> BevGrid:
    """Rasterize ego-frame points into an occupancy grid.

    Points outside ``range_`` and points within 0.15 m of ``ground_z`` are
    dropped; every other point adds 1 to its cell.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    nx, ny = range_.shape(resolution)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    keep = range_.mask(pts) & (np.abs(pts[:, 2] - ground_z) > GROUND_BAND)
    pts = pts[keep]
    ix = np.minimum(((pts[:, 0] - range_.x[0]) / resolution).astype(np.int64), nx - 1)
    iy = np.minimum(((pts[:, 1] - range_.y[0]) / resolution).astype(np.int64), ny - 1)
    flat = ix * ny + iy
    cells = np.bincount(flat, minlength=nx * ny).astype(np.float64).reshape(nx, ny)
    height = np.zeros(nx * ny)
    np.maximum.at(height, flat, pts[:, 2] - ground_z)
    return BevGrid(range_, resolution, cells, height.reshape(nx, ny), ground_z)


class FusionVariant(str, enum.Enum):
    EARLY = "Early"
    LATE = "Late"
    SUM = "IntermediateSum"
    MAX = "IntermediateMax"
    WEIGHTED = "IntermediateWeighted"


@dataclass(frozen=True)
class FusionMethod:
    variant: FusionVariant = FusionVariant.SUM
    weights: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", FusionVariant(self.variant))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.variant is FusionVariant.WEIGHTED:
            if not self.weights or min(self.weights) < 0 or not math.isclose(sum(self.weights), 1.0, abs_tol=1e-9):
                raise ValueError("weights must be non-negative and sum to 1")
        elif self.weights:
            raise ValueError(f"{self.variant.value} takes no weights")

    @property
    def is_intermediate(self) -> bool:
        return self.variant in (FusionVariant.SUM, FusionVariant.MAX, FusionVariant.WEIGHTED)

    @property
    def label(self) -> str:
        if self.variant is FusionVariant.WEIGHTED:
            return f"{self.variant.value}({','.join(repr(w) for w in self.weights)})"
        return self.variant.value

    def to_dict(self) -> dict:
        return {"variant": self.variant.value, "weights": list(self.weights)}

    @classmethod
    def from_dict(cls, d: dict) -> "FusionMethod":
        return cls(FusionVariant(d["variant"]), tuple(d.get("weights", ())))


def fuse(ego: BevGrid, aux: Sequence[BevGrid], method: FusionMethod) -> BevGrid:
    """Combine the ego grid with aux grids cell-wise.

    Heights always fuse by maximum. ``Early`` and ``Late`` only accept an
    empty aux list, since their fusion happens before extraction and after
    detection respectively.
    """
    if not aux:
        return ego
    for g in aux:
        if not g.same_layout(ego) or g.shape != ego.shape:
            raise ValueError("all grids must share range, resolution and ground level")
    v = method.variant
    if v is FusionVariant.SUM:
        cells = ego.cells.copy()
        for g in aux:
            cells += g.cells
    elif v is FusionVariant.MAX:
        cells = np.maximum.reduce([ego.cells, *(g.cells for g in aux)])
    elif v is FusionVariant.WEIGHTED:
        if len(method.weights) != 1 + len(aux):
            raise ValueError(f"need {1 + len(aux)} weights, got {len(method.weights)}")
        cells = method.weights[0] * ego.cells
        for w, g in zip(method.weights[1:], aux):
            cells = cells + w * g.cells
    else:
        raise ValueError(f"{v.value} fusion does not combine grids")
    height = np.maximum.reduce([ego.height, *(g.height for g in aux)])
    return BevGrid(ego.range, ego.resolution, cells, height, ego.ground_z)


_EIGHT = np.ones((3, 3), dtype=bool)


def components(grid: BevGrid, bridge: bool = True) -> list[tuple[np.ndarray, np.ndarray]]:
    """8-connected occupied regions as ``(ix, iy)`` index arrays, in label order.

    With ``bridge`` the labeling runs on the occupancy dilated by one cell,
    so occupied cells up to three cells apart (a gap of at most two empty
    cells, typical of sparse returns at grazing angles) join up. Only
    occupied cells are returned.
    """
    occ = grid.cells > 0
    mask = ndimage.binary_dilation(occ, structure=_EIGHT) if bridge else occ
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        return []
    labels = np.where(occ, labels, 0)
    ix, iy = np.nonzero(labels)
    lab = labels[ix, iy]
    order = np.argsort(lab, kind="stable")
    ix, iy, lab = ix[order], iy[order], lab[order]
    cuts = np.flatnonzero(np.diff(lab)) + 1
    return list(zip(np.split(ix, cuts), np.split(iy, cuts)))


def _rect_candidates(xs: np.ndarray, ys: np.ndarray):
    """Enclosing rectangles aligned with each convex hull edge.

    Returns orientations in [0, pi/2), the (min, max) projections on both
    axes, and the areas, one entry per distinct orientation.
    """
    hull = convex_hull(list(zip(xs.tolist(), ys.tolist())))
    pts = np.asarray(hull, dtype=np.float64).reshape(-1, 2)
    if len(hull) < 2:
        th = np.zeros(1)
    else:
        edges = (np.roll(pts, -1, axis=0) - pts) if len(hull) > 2 else pts[1:] - pts[:1]
        th = np.arctan2(edges[:, 1], edges[:, 0]) % (0.5 * math.pi)
        th[th >= 0.5 * math.pi - 1e-12] = 0.0
        th = np.unique(th)
    c, s = np.cos(th), np.sin(th)
    u = pts[:, :1] * c + pts[:, 1:] * s
    v = -pts[:, :1] * s + pts[:, 1:] * c
    umin, umax, vmin, vmax = u.min(axis=0), u.max(axis=0), v.min(axis=0), v.max(axis=0)
    return th, (umin, umax), (vmin, vmax), (umax - umin) * (vmax - vmin)


def min_area_rect(xs: np.ndarray, ys: np.ndarray) -> tuple[float, tuple[float, float], tuple[float, float]]:
    """Minimum-area enclosing rectangle by rotating calipers over the convex hull.

    Returns
    -------
    theta : float
        Orientation of the first axis in [0, pi/2).
    u_span, v_span : tuple of float
        (min, max) projections onto the first and second axes.
    """
    th, (umin, umax), (vmin, vmax), area = _rect_candidates(xs, ys)
    # first angle within 1e-9 of the minimum, so near-ties resolve stably
    k = int(np.flatnonzero(area <= area.min() + 1e-9)[0])
    return float(th[k]), (float(umin[k]), float(umax[k])), (float(vmin[k]), float(vmax[k]))


def closest_fit_rect(xs: np.ndarray, ys: np.ndarray, cx: np.ndarray, cy: np.ndarray,
                     slack: float = AREA_SLACK) -> tuple[float, tuple[float, float], tuple[float, float]]:
    """Enclosing rectangle of ``xs, ys`` that the samples ``cx, cy`` hug most closely.

    Only rectangles within ``1 + slack`` of the minimum area compete. A
    vehicle seen from one corner leaves an L of returns whose hull is nearly
    a right triangle; the rectangle along the legs and the one along the
    hypotenuse then tie on area, but only the former has every return on an
    edge. Ties in closeness keep the smaller area.
    """
    th, (umin, umax), (vmin, vmax), area = _rect_candidates(xs, ys)
    ok = np.flatnonzero(area <= area.min() * (1.0 + slack) + 1e-9)
    c, s = np.cos(th[ok]), np.sin(th[ok])
    u = cx[:, None] * c + cy[:, None] * s
    v = -cx[:, None] * s + cy[:, None] * c
    gap = np.minimum.reduce([u - umin[ok], umax[ok] - u, v - vmin[ok], vmax[ok] - v])
    score = np.round(gap.mean(axis=0), 9)
    k = int(ok[np.lexsort((area[ok], score))[0]])
    return float(th[k]), (float(umin[k]), float(umax[k])), (float(vmin[k]), float(vmax[k]))


def _place(lo: float, hi: float, size: float, origin: float) -> float:
    """Center along one axis for an object of ``size`` observed over [lo, hi].

    A side seen in full is centered on the observation; otherwise the
    visible part is taken as the face nearest the sensor and the object
    extends away from it.
    """
    if hi - lo >= size - FULL_SPAN_TOL:
        return 0.5 * (lo + hi)
    if origin <= 0.5 * (lo + hi):
        return lo + FACE_INSET + 0.5 * size
    return hi - FACE_INSET - 0.5 * size


def _outline(ix: np.ndarray, iy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Corners of the lowest and highest cell in every grid column, as lattice indices.

    The convex hull of these equals the hull of all the cells' squares.
    """
    cols, first = np.unique(ix, return_index=True)
    lo = np.minimum.reduceat(iy, first) if ix.size else iy
    hi = np.maximum.reduceat(iy, first) + 1 if ix.size else iy
    px = np.concatenate([cols, cols + 1, cols, cols + 1])
    py = np.concatenate([lo, lo, hi, hi])
    return px, py


def fit_box(ix: np.ndarray, iy: np.ndarray, max_height: float, weight: float, grid: BevGrid,
            catalog: Sequence[VehicleType] = CATALOG, origin: tuple[float, float] = (0.0, 0.0)
            ) -> OrientedBox3D | None:
    """Complete a partially observed component into a catalog-sized vehicle box.

    ``ix, iy`` are the component's cell indices. An enclosing rectangle is
    fitted to the cells' outer corners (see ``closest_fit_rect``), then the smallest catalog entry
    whose footprint and height can contain it is chosen. Returns None for
    components no entry explains.
    """
    if max_height > MAX_VEHICLE_HEIGHT:
        return None
    cell = grid.resolution
    # no yaw makes a catalog footprint's axis-aligned extent exceed its diagonal
    reach = max(math.hypot(t.l, t.w) for t in catalog) + 2.0 * (EXTENT_TOL + 2.0 * cell)
    if (ix.max() - ix.min() + 1) * cell > reach or (iy.max() - iy.min() + 1) * cell > reach:
        return None
    order = np.lexsort((iy, ix))
    px, py = _outline(ix[order], iy[order])
    cx, cy = grid.cell_center(ix, iy)
    theta, (u0, u1), (v0, v1) = closest_fit_rect(grid.range.x[0] + px * cell, grid.range.y[0] + py * cell, cx, cy)
    du, dv = u1 - u0, v1 - v0
    c, s = math.cos(theta), math.sin(theta)
    ou = origin[0] * c + origin[1] * s
    ov = -origin[0] * s + origin[1] * c
    major_is_u = du >= dv
    major, minor = (du, dv) if major_is_u else (dv, du)
    tol = EXTENT_TOL + cell * (abs(c) + abs(s))
    for vt in sorted(catalog, key=lambda t: (t.w * t.l, t.h)):
        if max_height > vt.h + HEIGHT_TOL or minor > vt.w + tol or major > vt.l + tol:
            continue
        # a long side must be the length; a short blob is most likely a rear or front face
        length_on_u = major_is_u if major > vt.w + tol else not major_is_u
        lu, lv = (vt.l, vt.w) if length_on_u else (vt.w, vt.l)
        cu = _place(u0, u1, lu, ou)
        cv = _place(v0, v1, lv, ov)
        x = cu * c - cv * s
        y = cu * s + cv * c
        yaw = theta if length_on_u else theta + 0.5 * math.pi
        conf = 1.0 - math.exp(-weight / CONFIDENCE_SCALE)
        return OrientedBox3D(x, y, grid.ground_z + 0.5 * vt.h, vt.w, vt.l, vt.h, yaw,
                             Label.VEHICLE, conf)
    return None


def detect(grid: BevGrid, min_cluster_cells: int = MIN_CLUSTER_CELLS,
           catalog: Sequence[VehicleType] = CATALOG,
           origins: Sequence[tuple[float, float]] = ((0.0, 0.0),)) -> list[OrientedBox3D]:
    """Oriented vehicle boxes from an occupancy grid.

    Occupied cells are grouped 8-connectedly; each group of at least
    ``min_cluster_cells`` cells gets an enclosing rectangle that is completed
    to a catalog vehicle size. Confidence is ``1 - exp(-points / 20)``.
    Boxes whose centers leave the range are dropped, and boxes overlapping a
    more confident one by ``DUPLICATE_IOU`` are suppressed.

    ``origins`` are the contributing sensors' positions in the grid frame; a
    partly seen component is completed away from the nearest one.
    """
    sensors = np.asarray(origins, dtype=np.float64).reshape(-1, 2)
    out: list[OrientedBox3D] = []
    for ix, iy in components(grid):
        if ix.size < min_cluster_cells:
            continue
        xs, ys = grid.cell_center(ix, iy)
        near = int(np.argmin(np.hypot(sensors[:, 0] - xs.mean(), sensors[:, 1] - ys.mean())))
        box = fit_box(ix, iy, float(grid.height[ix, iy].max()), float(grid.cells[ix, iy].sum()),
                      grid, catalog, tuple(sensors[near]))
        if box is not None and grid.range.contains(box.x, box.y):
            out.append(box)
    # sparse channels can split one vehicle into face and roof stripes
    return nms(out, DUPLICATE_IOU)


def late_fuse(per_agent_boxes: Sequence[Sequence[OrientedBox3D]], reported_poses: Sequence[Pose],
              iou_threshold: float = 0.1) -> list[OrientedBox3D]:
    """Merge per-agent detections in the first agent's frame and suppress duplicates.

    ``per_agent_boxes[i]`` is expressed in the frame at ``reported_poses[i]``;
    index 0 is the ego.
    """
    if len(per_agent_boxes) != len(reported_poses):
        raise ValueError("need one reported pose per agent")
    if not per_agent_boxes:
        return []
    if len(per_agent_boxes) == 1:
        return list(per_agent_boxes[0])
    ego = reported_poses[0]
    merged = list(per_agent_boxes[0])
    for boxes, pose in zip(per_agent_boxes[1:], reported_poses[1:]):
        merged += [transform_box(b, pose, ego) for b in boxes]
    return nms(merged, iou_threshold)

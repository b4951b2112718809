"""Poses, oriented boxes, and the exact geometric predicates built on them.

Conventions: world frame is right-handed with +z up and the ground at z = 0.
A box's length ``l`` runs along its heading (box-frame +x) and its width ``w``
across it. All BEV quantities live in the x-y plane.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _polygon

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]; values already in range come back untouched."""
    if -math.pi < theta <= math.pi:
        return theta
    wrapped = math.fmod(theta + math.pi, TWO_PI)
    if wrapped <= 0.0:
        wrapped += TWO_PI
    return wrapped - math.pi


class Label(str, enum.Enum):
    VEHICLE = "Vehicle"
    NOT_VEHICLE = "NotVehicle"


@dataclass(frozen=True)
class Pose:
    """Sensor or body pose: position in meters, yaw in radians about +z."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    yaw: float = 0.0

    def __post_init__(self) -> None:
        vals = (self.x, self.y, self.z, self.yaw)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite pose {vals}")
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def translation(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "z": self.z, "yaw": self.yaw}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        return cls(d["x"], d["y"], d["z"], d["yaw"])


WORLD = Pose()


@dataclass(frozen=True)
class OrientedBox3D:
    """Ground-truth or predicted object box.

    ``(x, y, z)`` is the box center, ``(w, l, h)`` its size and ``yaw`` the
    heading. Ground truth carries ``confidence=1.0``.
    """

    x: float
    y: float
    z: float
    w: float
    l: float
    h: float
    yaw: float = 0.0
    label: Label = Label.VEHICLE
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.l > 0 and self.h > 0):
            raise ValueError(f"box size must be positive, got w={self.w} l={self.l} h={self.h}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z, self.yaw)):
            raise ValueError("non-finite box parameters")
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))
        object.__setattr__(self, "label", Label(self.label))

    @property
    def center(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    @property
    def size(self) -> tuple[float, float, float]:
        return (self.w, self.l, self.h)

    def bev(self) -> tuple[float, float, float, float, float]:
        return (self.x, self.y, self.w, self.l, self.yaw)

    def corners_bev(self) -> list[tuple[float, float]]:
        return _polygon.rect_corners(*self.bev())

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.w, self.l, self.h, self.yaw])

    def with_confidence(self, confidence: float) -> "OrientedBox3D":
        return OrientedBox3D(self.x, self.y, self.z, self.w, self.l, self.h, self.yaw,
                             self.label, confidence)

    def to_dict(self) -> dict:
        return {
            "x": self.x, "y": self.y, "z": self.z,
            "w": self.w, "l": self.l, "h": self.h,
            "yaw": self.yaw, "label": self.label.value, "confidence": self.confidence,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OrientedBox3D":
        return cls(d["x"], d["y"], d["z"], d["w"], d["l"], d["h"], d["yaw"],
                   Label(d["label"]), d["confidence"])


@dataclass(frozen=True)
class Ray:
    origin: tuple[float, float, float]
    direction: tuple[float, float, float] = field(default=(1.0, 0.0, 0.0))

    def __post_init__(self) -> None:
        n = math.sqrt(sum(c * c for c in self.direction))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"ray direction must be unit length, |d|={n}")


def boxes_to_array(boxes: Sequence[OrientedBox3D]) -> np.ndarray:
    """Stack boxes into an ``(N, 7)`` array ``[x, y, z, w, l, h, yaw]``."""
    if not boxes:
        return np.zeros((0, 7))
    return np.array([b.to_array() for b in boxes], dtype=np.float64)


def transform_to_frame(points: np.ndarray, from_pose: Pose, to_pose: Pose = WORLD) -> np.ndarray:
    """Re-express ``(N, 3)`` points given in ``from_pose``'s frame in ``to_pose``'s frame."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if from_pose == to_pose:
        return pts.copy()
    world = pts @ from_pose.rotation().T + from_pose.translation()
    return (world - to_pose.translation()) @ to_pose.rotation()


def compose(from_pose: Pose, to_pose: Pose) -> Pose:
    """Pose of ``from_pose``'s frame expressed in ``to_pose``'s frame."""
    dx, dy, dz = from_pose.x - to_pose.x, from_pose.y - to_pose.y, from_pose.z - to_pose.z
    c, s = math.cos(to_pose.yaw), math.sin(to_pose.yaw)
    return Pose(c * dx + s * dy, -s * dx + c * dy, dz, from_pose.yaw - to_pose.yaw)


def transform_box(box: OrientedBox3D, from_pose: Pose, to_pose: Pose = WORLD) -> OrientedBox3D:
    rel = compose(from_pose, to_pose)
    c, s = math.cos(rel.yaw), math.sin(rel.yaw)
    return OrientedBox3D(
        rel.x + c * box.x - s * box.y,
        rel.y + s * box.x + c * box.y,
        rel.z + box.z,
        box.w, box.l, box.h,
        box.yaw + rel.yaw,
        box.label, box.confidence,
    )


def bev_iou(a: OrientedBox3D, b: OrientedBox3D) -> float:
    """Intersection over union of the two boxes' x-y footprints.

    The pair is put in a canonical order first, so ``bev_iou(a, b)`` and
    ``bev_iou(b, a)`` run the identical float computation.
    """
    pa, pb = a.bev(), b.bev()
    if pb < pa:
        pa, pb = pb, pa
    return _polygon.rect_iou(pa, pb)


def ray_box_intersect(ray: Ray, box: OrientedBox3D) -> float | None:
    """Smallest t >= 0 where the ray meets the box surface, or None."""
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    ox, oy, oz = (ray.origin[0] - box.x, ray.origin[1] - box.y, ray.origin[2] - box.z)
    dx, dy, dz = ray.direction
    # into box frame
    o = (c * ox + s * oy, -s * ox + c * oy, oz)
    d = (c * dx + s * dy, -s * dx + c * dy, dz)
    half = (0.5 * box.l, 0.5 * box.w, 0.5 * box.h)
    t_near, t_far = -math.inf, math.inf
    for k in range(3):
        if d[k] == 0.0:
            if abs(o[k]) > half[k]:
                return None
            continue
        t1 = (-half[k] - o[k]) / d[k]
        t2 = (half[k] - o[k]) / d[k]
        if t1 > t2:
            t1, t2 = t2, t1
        t_near = max(t_near, t1)
        t_far = min(t_far, t2)
        if t_near > t_far:
            return None
    if t_far < 0.0:
        return None
    return t_near if t_near >= 0.0 else t_far


def nms(boxes: Sequence[OrientedBox3D], iou_threshold: float) -> list[OrientedBox3D]:
    """Greedy suppression by descending confidence; ties go to the earlier box."""
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must lie in (0, 1)")
    order = sorted(range(len(boxes)), key=lambda i: (-boxes[i].confidence, i))
    kept: list[OrientedBox3D] = []
    for i in order:
        cand = boxes[i]
        if all(bev_iou(cand, k) < iou_threshold for k in kept):
            kept.append(cand)
    return kept


def points_in_box(points: np.ndarray, box: OrientedBox3D, margin: float = 0.0) -> np.ndarray:
    """Boolean mask of ``(N, 3)`` world points inside ``box`` grown by ``margin``."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    dx, dy, dz = pts[:, 0] - box.x, pts[:, 1] - box.y, pts[:, 2] - box.z
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    return (
        (np.abs(lx) <= 0.5 * box.l + margin)
        & (np.abs(ly) <= 0.5 * box.w + margin)
        & (np.abs(dz) <= 0.5 * box.h + margin)
    )


def footprints_overlap(a: OrientedBox3D, b: OrientedBox3D, clearance: float = 0.0) -> bool:
    """Separating-axis test on BEV rectangles, each grown by ``clearance / 2``."""
    ga = _polygon.rect_corners(a.x, a.y, a.w + clearance, a.l + clearance, a.yaw)
    gb = _polygon.rect_corners(b.x, b.y, b.w + clearance, b.l + clearance, b.yaw)
    for poly in (ga, gb):
        for i in range(4):
            x0, y0 = poly[i]
            x1, y1 = poly[(i + 1) % 4]
            nx, ny = y0 - y1, x1 - x0
            pa = [nx * p[0] + ny * p[1] for p in ga]
            pb = [nx * p[0] + ny * p[1] for p in gb]
            if max(pa) <= min(pb) or max(pb) <= min(pa):
                return False
    return True

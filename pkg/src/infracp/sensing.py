"""LiDAR simulation by first-hit ray casting from an agent's mount pose."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .geometry import OrientedBox3D, Pose, boxes_to_array, points_in_box, transform_to_frame
from .scene import AgentKind, AgentSpec, Scene

ACTOR_MARGIN = 0.01


@dataclass(frozen=True)
class LidarConfig:
    """Spinning LiDAR model: evenly spaced channels times a full azimuth sweep.

    Attributes
    ----------
    n_channels : int
        Number of vertical beams, spread evenly over ``vertical_fov``.
    vertical_fov : tuple of float
        (lowest, highest) elevation in radians.
    azimuth_step : float
        Horizontal spacing in radians; must divide 2*pi.
    max_range, min_range : float
        Returns outside ``[min_range, max_range]`` are dropped.
    """

    n_channels: int = 32
    vertical_fov: tuple[float, float] = (math.radians(-25.0), math.radians(5.0))
    azimuth_step: float = math.radians(0.5)
    max_range: float = 120.0
    min_range: float = 0.5

    def __post_init__(self) -> None:
        if self.n_channels < 1:
            raise ValueError("n_channels must be >= 1")
        lo, hi = self.vertical_fov
        if not lo <= hi:
            raise ValueError("vertical_fov must be (low, high)")
        if not 0.0 <= self.min_range < self.max_range:
            raise ValueError("need 0 <= min_range < max_range")
        if self.azimuth_step <= 0.0:
            raise ValueError("azimuth_step must be positive")
        steps = 2.0 * math.pi / self.azimuth_step
        if abs(steps - round(steps)) * self.azimuth_step > 1e-9:
            raise ValueError("azimuth_step must divide 2*pi")

    @classmethod
    def vehicle(cls) -> "LidarConfig":
        return cls()

    @classmethod
    def infrastructure(cls) -> "LidarConfig":
        return cls(vertical_fov=(math.radians(-60.0), math.radians(5.0)))

    @classmethod
    def for_agent(cls, agent: AgentSpec) -> "LidarConfig":
        if agent.kind is AgentKind.INFRASTRUCTURE:
            return cls.infrastructure()
        return cls.vehicle()

    @property
    def n_azimuth(self) -> int:
        return int(round(2.0 * math.pi / self.azimuth_step))

    def directions(self) -> np.ndarray:
        """Unit ray directions in the sensor frame, channel-major, ``(C*A, 3)``."""
        lo, hi = self.vertical_fov
        el = np.linspace(lo, hi, self.n_channels) if self.n_channels > 1 else np.array([lo])
        az = np.arange(self.n_azimuth) * self.azimuth_step
        ce, se = np.cos(el)[:, None], np.sin(el)[:, None]
        d = np.empty((self.n_channels, az.size, 3))
        d[..., 0] = ce * np.cos(az)[None, :]
        d[..., 1] = ce * np.sin(az)[None, :]
        d[..., 2] = se
        return d.reshape(-1, 3)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Points in the sensing agent's frame (origin at the LiDAR)."""

    points: np.ndarray
    source_agent: str
    timestamp: int

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        return (self.source_agent == other.source_agent and self.timestamp == other.timestamp
                and self.points.shape == other.points.shape
                and self.points.tobytes() == other.points.tobytes())

    __hash__ = None  # type: ignore[assignment]


def cast(origin: Pose, boxes: np.ndarray, cfg: LidarConfig, exclude: int = -1,
         ground: bool = True) -> np.ndarray:
    """Ray-cast from ``origin`` against ``(M, 7)`` world boxes; returns sensor-frame points."""
    d_sensor = cfg.directions()
    d_world = d_sensor @ origin.rotation().T
    o = np.array([origin.x, origin.y, origin.z])
    dist, _hit = kernels.cast_rays(o, d_world, boxes, exclude=exclude, ground=ground,
                                   max_range=cfg.max_range)
    keep = np.isfinite(dist) & (dist >= cfg.min_range)
    return d_sensor[keep] * dist[keep, None]


def scene_boxes(scene: Scene, frame: int) -> np.ndarray:
    """Actors then occluders at ``frame`` as ``(M, 7)`` rows; actor ``i`` is row ``i``."""
    return boxes_to_array(list(scene.frames[frame].actors) + list(scene.occluders))


def raycast(scene: Scene, frame: int, agent: AgentSpec, cfg: LidarConfig | None = None) -> PointCloud:
    """Sense ``scene`` at ``frame`` from ``agent``'s LiDAR.

    Every (channel, azimuth) ray returns its nearest hit among actors,
    occluders and the ground plane, skipping the agent's own body.
    """
    if agent not in scene.agents:
        raise KeyError(f"agent {agent.agent_id} is not part of scene {scene.scene_id}")
    cfg = cfg or LidarConfig.for_agent(agent)
    pose = scene.agent_pose(agent.agent_id, frame)
    exclude = -1 if agent.actor_index is None else agent.actor_index
    pts = cast(pose, scene_boxes(scene, frame), cfg, exclude=exclude)
    return PointCloud(pts, agent.agent_id, frame)


def points_on_actor(cloud: PointCloud, actor: OrientedBox3D, agent_pose: Pose) -> int:
    """Count cloud points inside the world-frame ``actor`` box grown by 1 cm."""
    if len(cloud) == 0:
        return 0
    world = transform_to_frame(cloud.points, agent_pose)
    return int(points_in_box(world, actor, ACTOR_MARGIN).sum())


_HEADER = struct.Struct("<Q")


def dump_points(path: str | Path, points: np.ndarray) -> None:
    """Write ``(N, 3)`` points as a little-endian uint64 count then float32 triples."""
    pts = np.asarray(points, dtype="<f4").reshape(-1, 3)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(pts.shape[0]))
        fh.write(pts.tobytes())


def load_points(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("truncated point file")
    (n,) = _HEADER.unpack_from(data)
    body = data[_HEADER.size:]
    if len(body) != 12 * n:
        raise ValueError(f"point file declares {n} points but holds {len(body)} bytes")
    return np.frombuffer(body, dtype="<f4").reshape(n, 3).astype(np.float64)

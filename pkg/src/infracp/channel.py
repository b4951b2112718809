"""Sharing sensed data between agents: pose noise, latency, and compression.

The ego's own message never passes through the channel, so its payload and
pose are exactly what it sensed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import Pose
from .scene import AgentKind, AgentSpec, Scene
from .sensing import PointCloud, raycast

BASE_VOXEL = 0.4
HARSH_LEVELS = 6
HARSH_SIGMA_XY_STEP = 0.1
HARSH_SIGMA_YAW_STEP = 0.2

Sensor = Callable[[AgentSpec, int], PointCloud]


@dataclass(frozen=True)
class NoiseSetting:
    """Communication noise applied to aux agents' shared data.

    Attributes
    ----------
    name : str
        ``"Perfect"``, ``"Simple"`` or ``"Harsh"``.
    level : int or None
        Sweep index for ``"Harsh"``, else None.
    sigma_xy : float
        Position noise std in meters, applied to x and y independently.
    sigma_yaw : float
        Heading noise std in degrees.
    latency_frames : int
    compression_factor : int
    """

    name: str = "Perfect"
    level: int | None = None
    sigma_xy: float = 0.0
    sigma_yaw: float = 0.0
    latency_frames: int = 0
    compression_factor: int = 1

    def __post_init__(self) -> None:
        if self.name not in ("Perfect", "Simple", "Harsh"):
            raise ValueError(f"unknown noise setting {self.name!r}")
        if (self.name == "Harsh") != (self.level is not None):
            raise ValueError("level is required for Harsh and only for Harsh")
        if min(self.sigma_xy, self.sigma_yaw) < 0 or self.latency_frames < 0:
            raise ValueError("noise magnitudes must be non-negative")
        if self.compression_factor < 1:
            raise ValueError("compression_factor must be >= 1")
        if self.name == "Perfect" and (self.sigma_xy or self.sigma_yaw or self.latency_frames):
            raise ValueError("Perfect setting must carry zero noise and latency")

    @classmethod
    def perfect(cls) -> "NoiseSetting":
        return cls()

    @classmethod
    def simple(cls) -> "NoiseSetting":
        return cls("Simple", None, 0.2, 0.2)

    @classmethod
    def harsh(cls, level: int) -> "NoiseSetting":
        if not 0 <= level < HARSH_LEVELS:
            raise ValueError(f"harsh level must lie in [0, {HARSH_LEVELS - 1}]")
        return cls("Harsh", level, round(HARSH_SIGMA_XY_STEP * level, 10),
                   round(HARSH_SIGMA_YAW_STEP * level, 10))

    @classmethod
    def sweep(cls) -> list["NoiseSetting"]:
        return [cls.harsh(k) for k in range(HARSH_LEVELS)]

    @property
    def label(self) -> str:
        return f"Harsh({self.level})" if self.name == "Harsh" else self.name

    def to_dict(self) -> dict:
        return {
            "name": self.name, "level": self.level, "sigma_xy": self.sigma_xy,
            "sigma_yaw": self.sigma_yaw, "latency_frames": self.latency_frames,
            "compression_factor": self.compression_factor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSetting":
        return cls(**d)

    @classmethod
    def parse(cls, text: str) -> "NoiseSetting":
        """Parse ``Perfect``, ``Simple`` or ``Harsh(k)`` (also ``harsh:k``)."""
        t = text.strip()
        low = t.lower()
        if low == "perfect":
            return cls.perfect()
        if low == "simple":
            return cls.simple()
        for prefix, suffix in (("harsh(", ")"), ("harsh:", "")):
            if low.startswith(prefix) and low.endswith(suffix):
                body = t[len(prefix):len(t) - len(suffix)]
                try:
                    return cls.harsh(int(body))
                except ValueError as exc:
                    raise ValueError(f"bad harsh level in {text!r}") from exc
        raise ValueError(f"cannot parse noise setting {text!r}")


@dataclass(frozen=True)
class ChannelConfig:
    noise: NoiseSetting = NoiseSetting()
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, eq=False)
class Message:
    """One agent's shared data as received by the ego.

    ``payload`` holds points in the sender's sensor frame; ``reported_pose``
    is where the sender claims that frame is.
    """

    agent_id: str
    agent_kind: AgentKind
    timestamp: int
    reported_pose: Pose
    payload: np.ndarray
    is_ego: bool = False


def noise_rng(seed: int, agent: AgentSpec, frame: int) -> np.random.Generator:
    """Independent stream per (seed, agent, frame), unaffected by list order."""
    return np.random.default_rng([seed, agent.numeric_id, frame])


def perturb_pose(pose: Pose, setting: NoiseSetting, rng: np.random.Generator) -> Pose:
    """Offset x, y by N(0, sigma_xy) and yaw by N(0, sigma_yaw deg); z is kept.

    Three standard normals are always drawn and then scaled, so one stream
    gives proportionally larger offsets at higher noise levels.
    """
    z = rng.standard_normal(3)
    if setting.sigma_xy == 0.0 and setting.sigma_yaw == 0.0:
        return pose
    return Pose(
        pose.x + setting.sigma_xy * z[0],
        pose.y + setting.sigma_xy * z[1],
        pose.z,
        pose.yaw + math.radians(setting.sigma_yaw) * z[2],
    )


def _voxel_centroids(pts: np.ndarray, edge: float) -> np.ndarray:
    keys = np.floor(pts / edge).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((counts.size, 3))
    np.add.at(sums, inverse, pts)
    return sums / counts[:, None]


def compress(points: np.ndarray, factor: int, base_voxel: float = BASE_VOXEL) -> np.ndarray:
    """Voxel-grid downsample to one centroid per occupied voxel.

    The final voxel edge is ``base_voxel * sqrt(factor)``; ``factor == 1``
    returns the input untouched. Grids for different factors are not
    nested, so factor ``k`` runs the downsample for every factor 2..k in
    turn; that keeps the point count non-increasing in the factor.
    """
    if factor < 1:
        raise ValueError("compression factor must be >= 1")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    for f in range(2, factor + 1):
        if pts.shape[0] == 0:
            break
        pts = _voxel_centroids(pts, base_voxel * math.sqrt(f))
    return pts


def share(scene: Scene, frame: int, ego: AgentSpec, aux: Sequence[AgentSpec], cfg: ChannelConfig,
          sense: Sensor | None = None) -> list[Message]:
    """Messages received by ``ego`` at ``frame``: its own first, then one per aux agent.

    Parameters
    ----------
    sense : callable, optional
        ``sense(agent, frame) -> PointCloud``; defaults to :func:`raycast`
        with the agent's default LiDAR. Pass a cached sensor to reuse casts.
    """
    if any(a.agent_id == ego.agent_id for a in aux):
        raise ValueError("ego must not be listed among aux agents")
    if sense is None:
        def sense(agent: AgentSpec, f: int) -> PointCloud:
            return raycast(scene, f, agent)
    noise = cfg.noise
    own = sense(ego, frame)
    out = [Message(ego.agent_id, ego.kind, frame, scene.agent_pose(ego.agent_id, frame),
                   own.points, is_ego=True)]
    t = max(0, frame - noise.latency_frames)
    for a in aux:
        cloud = sense(a, t)
        pose = perturb_pose(scene.agent_pose(a.agent_id, t), noise, noise_rng(cfg.rng_seed, a, frame))
        out.append(Message(a.agent_id, a.kind, t, pose, compress(cloud.points, noise.compression_factor)))
    return out

"""Procedural traffic scenes: road layouts, occluders, moving actors, and agents.

Four archetypes are generated. Each is a fixed road layout plus seeded
randomness for actor placement, speeds, vehicle types, building heights and
agent jitter:

``FourWayIntersection`` / ``ThreeWayIntersection``
    A single junction with corner building blocks and parking lots far out
    along the main road, hidden behind the buildings.
``MergeRamp``
    A three-lane freeway with an on-ramp separated from it by a 3 m noise
    barrier. Vehicle agents ride the ramp; the infrastructure pole stands at
    the merge point and sees over the barrier.
``TwinIntersections``
    Two junctions 120 m apart. The infrastructure covers the first one only;
    the aux vehicle is at the second.

Vehicle agents are physical actors (the first ``n_vehicle_agents`` entries of
every frame's actor list), so they occlude and are detected by others.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .geometry import OrientedBox3D, Pose, footprints_overlap, transform_box

if TYPE_CHECKING:
    from .fusion import DetectionRange

SCENE_SCHEMA = "infracp.scene"
SCENE_SCHEMA_VERSION = 1

FRAME_DT = 0.1
VEHICLE_SENSOR_HEIGHT = 1.9
# per data regime; see DetectionRange presets in fusion
INFRA_SENSOR_HEIGHT = {"v2xset": 5.5, "v2xsim": 7.4}

LANE_OFFSETS = (1.75, 5.25)
BLOCK_SETBACK = 10.0
CLEARANCE = 0.6
MAX_ATTEMPTS = 1000


@dataclass(frozen=True)
class VehicleType:
    name: str
    w: float
    l: float
    h: float


SEDAN = VehicleType("sedan", 2.0, 4.5, 1.6)
VAN = VehicleType("van", 2.4, 6.0, 2.4)
BUS = VehicleType("bus", 2.5, 12.0, 3.5)
CATALOG = (SEDAN, VAN, BUS)


class AgentKind(str, enum.Enum):
    VEHICLE = "V"
    INFRASTRUCTURE = "I"


class Archetype(str, enum.Enum):
    FOUR_WAY = "FourWayIntersection"
    THREE_WAY = "ThreeWayIntersection"
    MERGE_RAMP = "MergeRamp"
    TWIN = "TwinIntersections"


@dataclass(frozen=True)
class AgentSpec:
    """A sensing agent. ``mount_pose`` is the LiDAR origin at frame 0."""

    agent_id: str
    kind: AgentKind
    mount_pose: Pose
    is_ego: bool = False
    actor_index: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", AgentKind(self.kind))
        z = self.mount_pose.z
        if self.kind is AgentKind.VEHICLE and not 1.5 <= z <= 2.5:
            raise ValueError(f"vehicle sensor height {z} outside [1.5, 2.5] m")
        if self.kind is AgentKind.INFRASTRUCTURE and not 4.0 <= z <= 8.0:
            raise ValueError(f"infrastructure sensor height {z} outside [4.0, 8.0] m")

    @property
    def numeric_id(self) -> int:
        """Stable integer id for RNG stream derivation (vehicles < 1000 <= infra)."""
        base = 0 if self.kind is AgentKind.VEHICLE else 1000
        return base + int(self.agent_id[1:])

    def to_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "kind": self.kind.value,
            "mount_pose": self.mount_pose.to_dict(),
            "is_ego": self.is_ego,
            "actor_index": self.actor_index,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AgentSpec":
        return cls(d["agent_id"], AgentKind(d["kind"]), Pose.from_dict(d["mount_pose"]),
                   d["is_ego"], d["actor_index"])


@dataclass(frozen=True)
class ScenarioSpec:
    archetype: Archetype
    n_vehicle_agents: int = 2
    n_infra_agents: int = 1
    n_actors: int = 24
    occluder_density: float = 1.0
    n_frames: int = 20
    seed: int = 0
    regime: str = "v2xset"

    def __post_init__(self) -> None:
        object.__setattr__(self, "archetype", Archetype(self.archetype))
        if self.n_vehicle_agents < 1:
            raise ValueError("a scenario needs at least one vehicle agent")
        if min(self.n_infra_agents, self.n_actors) < 0 or self.n_frames < 1:
            raise ValueError("counts must be non-negative and n_frames >= 1")
        if not 0.0 <= self.occluder_density <= 1.0:
            raise ValueError("occluder_density must lie in [0, 1]")
        if self.regime not in INFRA_SENSOR_HEIGHT:
            raise ValueError(f"unknown regime {self.regime!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["archetype"] = self.archetype.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        return cls(**d)


@dataclass(frozen=True)
class Frame:
    actors: tuple[OrientedBox3D, ...]
    agent_poses: tuple[Pose, ...]


@dataclass(frozen=True)
class Scene:
    spec: ScenarioSpec
    occluders: tuple[OrientedBox3D, ...]
    frames: tuple[Frame, ...]
    agents: tuple[AgentSpec, ...]

    @property
    def scene_id(self) -> str:
        return f"{self.spec.archetype.value}-s{self.spec.seed}"

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def agent(self, agent_id: str) -> AgentSpec:
        for a in self.agents:
            if a.agent_id == agent_id:
                return a
        raise KeyError(agent_id)

    def agent_index(self, agent_id: str) -> int:
        for i, a in enumerate(self.agents):
            if a.agent_id == agent_id:
                return i
        raise KeyError(agent_id)

    def agent_pose(self, agent_id: str, frame: int) -> Pose:
        self._check_frame(frame)
        return self.frames[frame].agent_poses[self.agent_index(agent_id)]

    def vehicles(self) -> list[AgentSpec]:
        return [a for a in self.agents if a.kind is AgentKind.VEHICLE]

    def infrastructure(self) -> list[AgentSpec]:
        return [a for a in self.agents if a.kind is AgentKind.INFRASTRUCTURE]

    def _check_frame(self, frame: int) -> None:
        if not 0 <= frame < len(self.frames):
            raise IndexError(f"frame {frame} out of range [0, {len(self.frames)})")

    def to_dict(self) -> dict:
        return {
            "schema": SCENE_SCHEMA,
            "version": SCENE_SCHEMA_VERSION,
            "spec": self.spec.to_dict(),
            "occluders": [b.to_dict() for b in self.occluders],
            "agents": [a.to_dict() for a in self.agents],
            "frames": [
                {
                    "actors": [b.to_dict() for b in f.actors],
                    "agent_poses": [p.to_dict() for p in f.agent_poses],
                }
                for f in self.frames
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        if d.get("schema") != SCENE_SCHEMA or d.get("version") != SCENE_SCHEMA_VERSION:
            raise ValueError(f"unsupported scene document {d.get('schema')}/{d.get('version')}")
        return cls(
            spec=ScenarioSpec.from_dict(d["spec"]),
            occluders=tuple(OrientedBox3D.from_dict(b) for b in d["occluders"]),
            frames=tuple(
                Frame(
                    tuple(OrientedBox3D.from_dict(b) for b in f["actors"]),
                    tuple(Pose.from_dict(p) for p in f["agent_poses"]),
                )
                for f in d["frames"]
            ),
            agents=tuple(AgentSpec.from_dict(a) for a in d["agents"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "Scene":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# layout primitives


class LanePath:
    """Directed polyline with arc-length parametrisation."""

    def __init__(self, points: Sequence[Sequence[float]], region: int = 0):
        self.points = np.asarray(points, dtype=np.float64)
        seg = np.diff(self.points, axis=0)
        self._seg = seg
        self._len = np.hypot(seg[:, 0], seg[:, 1])
        self._cum = np.concatenate([[0.0], np.cumsum(self._len)])
        self._yaw = np.arctan2(seg[:, 1], seg[:, 0])
        self.length = float(self._cum[-1])
        self.region = region

    def at(self, s: float) -> tuple[float, float, float]:
        i = int(np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, len(self._len) - 1))
        t = (s - self._cum[i]) / self._len[i]
        p = self.points[i] + t * self._seg[i]
        return float(p[0]), float(p[1]), float(self._yaw[i])


def _bezier(a, c, b, n=24):
    t = np.linspace(0.0, 1.0, n)[:, None]
    return (1 - t) ** 2 * np.asarray(a) + 2 * (1 - t) * t * np.asarray(c) + t**2 * np.asarray(b)


_ARM_DIRS = {"E": (1.0, 0.0), "N": (0.0, 1.0), "W": (-1.0, 0.0), "S": (0.0, -1.0)}
_OPPOSITE = {"E": "W", "W": "E", "N": "S", "S": "N"}


def _junction_paths(center, arms: dict[str, float], through: set[str] | None = None):
    """Lane paths through a junction with right-hand traffic.

    ``arms`` maps arm direction to its length; ``through`` limits which straight
    crossings are generated (by the incoming arm), ``None`` meaning all.
    """
    c = np.asarray(center, dtype=np.float64)
    paths: list[list[np.ndarray]] = []

    def incoming(arm, off):
        u = np.array(_ARM_DIRS[arm])
        n = np.array([-u[1], u[0]])
        return c + n * off, -u  # a point on the lane line, travel direction

    def outgoing(arm, off):
        u = np.array(_ARM_DIRS[arm])
        n = np.array([-u[1], u[0]])
        return c - n * off, u

    for a, la in arms.items():
        ua = np.array(_ARM_DIRS[a])
        for b, lb in arms.items():
            if a == b:
                continue
            ub = np.array(_ARM_DIRS[b])
            cross = ua[0] * ub[1] - ua[1] * ub[0]
            if b == _OPPOSITE[a]:
                if through is not None and a not in through:
                    continue
                for off in LANE_OFFSETS:
                    p, _ = incoming(a, off)
                    paths.append([p + ua * la, p + ub * lb])
                continue
            # travelling along -ua; turning toward ub. cross>0 => right turn
            right = cross > 0
            off = LANE_OFFSETS[1] if right else LANE_OFFSETS[0]
            radius = 6.0 if right else 8.0
            p_in, _ = incoming(a, off)
            p_out, _ = outgoing(b, off)
            # lane lines meet where p_in + ua*s == p_out + ub*t
            m = np.array([ua, -ub]).T
            s, _t = np.linalg.solve(m, p_out - p_in)
            corner = p_in + ua * s
            entry = corner + ua * radius
            exit_ = corner + ub * radius
            arc = _bezier(entry, corner, exit_)
            pts = [p_in + ua * la, *arc, corner + ub * lb]
            paths.append(pts)
    return paths


@dataclass
class _Layout:
    paths: list[LanePath]
    path_weights: list[float]
    spawn: list[tuple[float, float, float, float]]
    buildings: list[tuple[float, float, float, float]] = field(default_factory=list)
    barriers: list[OrientedBox3D] = field(default_factory=list)
    parking: list[tuple[float, float, float]] = field(default_factory=list)
    vehicle_slots: list[tuple[int, float, float]] = field(default_factory=list)
    infra_slots: list[tuple[float, float, float]] = field(default_factory=list)
    type_weights: tuple[float, float, float] = (0.6, 0.25, 0.15)
    parked_fraction: float = 0.0


def _blocks_along(x0: float, x1: float, rng: np.random.Generator, gap=(5.0, 9.0), length=(22.0, 40.0)):
    """Split [x0, x1] into building spans separated by alleys."""
    spans = []
    x = x0
    while x < x1 - 8.0:
        lb = float(rng.uniform(*length))
        end = min(x + lb, x1)
        spans.append((x, end))
        x = end + float(rng.uniform(*gap))
    return spans


def _quadrant_buildings(cx: float, rng, sx: int, sy: int, x_extent: float, cross: bool):
    """Building footprints (xmin, xmax, ymin, ymax) in one quadrant of a junction at (cx, 0)."""
    out = []
    depth = float(rng.uniform(22.0, 28.0))
    for a, b in _blocks_along(BLOCK_SETBACK, x_extent, rng):
        xs = sorted((cx + sx * a, cx + sx * b))
        ys = sorted((sy * BLOCK_SETBACK, sy * (BLOCK_SETBACK + depth)))
        out.append((xs[0], xs[1], ys[0], ys[1]))
    if cross:
        for a, b in _blocks_along(BLOCK_SETBACK + depth + 6.0, 150.0, rng):
            xs = sorted((cx + sx * BLOCK_SETBACK, cx + sx * (BLOCK_SETBACK + 24.0)))
            ys = sorted((sy * a, sy * b))
            out.append((xs[0], xs[1], ys[0], ys[1]))
    return out


def _parking_rows(x_ranges, rows=(44.0, 51.0, -44.0, -51.0)):
    slots = []
    for lo, hi in x_ranges:
        for y in rows:
            x = lo + 3.0
            while x <= hi - 3.0:
                slots.append((x, y, 0.0))
                x += 6.5
    return slots


def _layout_intersection(rng, three_way: bool) -> _Layout:
    arms = {"E": 160.0, "W": 160.0, "N": 160.0} if three_way else {
        "E": 160.0, "W": 160.0, "N": 160.0, "S": 160.0}
    raw = _junction_paths((0.0, 0.0), arms)
    paths = [LanePath(p) for p in raw]
    weights = [1.0] * len(paths)
    buildings = []
    for sx in (1, -1):
        buildings += _quadrant_buildings(0.0, rng, sx, 1, 150.0, cross=True)
        buildings += _quadrant_buildings(0.0, rng, sx, -1, 150.0, cross=not three_way)
    parking = _parking_rows([(90.0, 140.0), (-140.0, -90.0)])
    # ego approaches from the west; aux vehicle on the cross road
    ego_path = _find_path(paths, start=(-160.0, -1.75), end=(160.0, -1.75))
    if three_way:
        aux_path = _find_path(paths, start=(-1.75, 160.0), end=(160.0, -1.75))
    else:
        aux_path = _find_path(paths, start=(1.75, -160.0), end=(1.75, 160.0))
    return _Layout(
        paths=paths,
        path_weights=weights,
        spawn=[(-110.0, 110.0, -8.0, 8.0), (-8.0, 8.0, -110.0, 110.0)],
        buildings=buildings,
        parking=parking,
        vehicle_slots=[(ego_path, 90.0, 110.0), (aux_path, 110.0, 125.0)],
        infra_slots=[(-9.0, -9.0, 0.0), (9.0, 9.0, math.pi), (9.0, -9.0, math.pi / 2), (-9.0, 9.0, -math.pi / 2)],
        parked_fraction=0.25,
    )


def _layout_twin(rng) -> _Layout:
    bx = 120.0
    paths = [LanePath(p) for p in _junction_paths((0.0, 0.0), {"E": 280.0, "W": 160.0, "N": 160.0, "S": 160.0})]
    paths += [LanePath(p) for p in _junction_paths((bx, 0.0), {"E": 160.0, "W": 280.0, "N": 160.0, "S": 160.0},
                                                    through={"N", "S"})]
    buildings = []
    for sy in (1, -1):
        # west of A, between A and B, east of B
        for a, b in _blocks_along(-150.0, -BLOCK_SETBACK, rng):
            buildings.append((a, b, *sorted((sy * BLOCK_SETBACK, sy * 36.0))))
        for a, b in _blocks_along(BLOCK_SETBACK, bx - BLOCK_SETBACK, rng):
            buildings.append((a, b, *sorted((sy * BLOCK_SETBACK, sy * 36.0))))
        for a, b in _blocks_along(bx + BLOCK_SETBACK, bx + 150.0, rng):
            buildings.append((a, b, *sorted((sy * BLOCK_SETBACK, sy * 36.0))))
        for cx in (0.0, bx):
            for sx in (1, -1):
                for a, b in _blocks_along(42.0, 150.0, rng):
                    xs = sorted((cx + sx * BLOCK_SETBACK, cx + sx * 34.0))
                    buildings.append((xs[0], xs[1], *sorted((sy * a, sy * b))))
    ego_path = _find_path(paths, start=(-160.0, -1.75), end=(280.0, -1.75))
    aux_path = _find_path(paths, start=(bx + 1.75, -160.0), end=(bx + 1.75, 160.0))
    return _Layout(
        paths=paths,
        path_weights=[1.0] * len(paths),
        spawn=[(-90.0, 210.0, -8.0, 8.0), (-8.0, 8.0, -90.0, 90.0), (bx - 8.0, bx + 8.0, -90.0, 90.0)],
        buildings=buildings,
        vehicle_slots=[(ego_path, 163.0, 175.0), (aux_path, 115.0, 128.0)],
        infra_slots=[(-9.0, -9.0, 0.0), (9.0, 9.0, math.pi), (9.0, -9.0, math.pi / 2), (-9.0, 9.0, -math.pi / 2)],
    )


def _layout_merge(rng) -> _Layout:
    main = [LanePath([(-160.0, y), (160.0, y)]) for y in (0.0, 3.5, 7.0)]
    ramp_y = -7.0
    ramp_pts = [(-160.0, ramp_y), (0.0, ramp_y)]
    ramp_pts += [(x, ramp_y * (1.0 - x / 60.0)) for x in np.linspace(5.0, 60.0, 12)]
    ramp_pts += [(160.0, 0.0)]
    ramp = LanePath(ramp_pts)
    barriers = []
    x = -160.0
    while x < 0.0:
        end = min(x + 20.0, 0.0)
        barriers.append(OrientedBox3D(0.5 * (x + end), -3.5, 1.5, 0.4, end - x, 3.0, 0.0))
        x = end
    buildings = []
    for a, b in _blocks_along(-150.0, 150.0, rng):
        buildings.append((a, b, 14.0, 34.0))
        buildings.append((a, b, -34.0, -14.0))
    return _Layout(
        paths=[*main, ramp],
        path_weights=[2.2, 1.3, 1.0, 1.6],
        spawn=[(-110.0, 110.0, -1.0, 8.0), (-150.0, 60.0, -8.0, -1.0)],
        buildings=buildings,
        barriers=barriers,
        vehicle_slots=[(3, 110.0, 125.0), (3, 62.0, 75.0)],
        infra_slots=[(-3.0, -4.4, 0.0), (40.0, -4.0, 0.0)],
        type_weights=(0.4, 0.3, 0.3),
    )


def _find_path(paths: list[LanePath], start, end) -> int:
    best, best_d = -1, math.inf
    for i, p in enumerate(paths):
        d = math.hypot(*(p.points[0] - start)) + math.hypot(*(p.points[-1] - end))
        if d < best_d:
            best, best_d = i, d
    if best_d > 10.0:
        raise RuntimeError(f"no lane path from {start} to {end}")
    return best


# ---------------------------------------------------------------------------
# generation


class _Occupancy:
    """Per-frame footprints already placed, with a circle prefilter."""

    def __init__(self, n_frames: int, static: Sequence[OrientedBox3D]):
        self.n_frames = n_frames
        self.static = list(static)
        self.tracks: list[list[OrientedBox3D]] = []

    def free(self, track: list[OrientedBox3D]) -> bool:
        for b in track:
            for s in self.static:
                if _near(b, s) and footprints_overlap(b, s, CLEARANCE):
                    return False
        for other in self.tracks:
            for b, o in zip(track, other):
                if _near(b, o) and footprints_overlap(b, o, CLEARANCE):
                    return False
        return True

    def add(self, track: list[OrientedBox3D]) -> None:
        self.tracks.append(track)


def _near(a: OrientedBox3D, b: OrientedBox3D) -> bool:
    reach = 0.5 * (math.hypot(a.w, a.l) + math.hypot(b.w, b.l)) + CLEARANCE
    return abs(a.x - b.x) < reach and abs(a.y - b.y) < reach


def _in_spawn(x: float, y: float, spawn) -> bool:
    return any(x0 <= x <= x1 and y0 <= y <= y1 for x0, x1, y0, y1 in spawn)


def _track(path: LanePath, s0: float, speed: float, vt: VehicleType, n_frames: int) -> list[OrientedBox3D]:
    out = []
    for f in range(n_frames):
        x, y, yaw = path.at(s0 + speed * FRAME_DT * f)
        out.append(OrientedBox3D(x, y, 0.5 * vt.h, vt.w, vt.l, vt.h, yaw))
    return out


def generate(spec: ScenarioSpec) -> Scene:
    """Build a deterministic scene for ``spec``.

    Raises
    ------
    ValueError
        If an actor cannot be placed without overlap in ``MAX_ATTEMPTS`` tries.
    """
    arche_idx = list(Archetype).index(spec.archetype)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, arche_idx]))

    if spec.archetype is Archetype.FOUR_WAY:
        layout = _layout_intersection(rng, three_way=False)
    elif spec.archetype is Archetype.THREE_WAY:
        layout = _layout_intersection(rng, three_way=True)
    elif spec.archetype is Archetype.MERGE_RAMP:
        layout = _layout_merge(rng)
    else:
        layout = _layout_twin(rng)

    # occluders: one draw per candidate keeps the stream independent of density
    occluders: list[OrientedBox3D] = []
    for xmin, xmax, ymin, ymax in layout.buildings:
        keep, height = rng.random(), float(rng.uniform(8.0, 20.0))
        if keep < spec.occluder_density:
            occluders.append(OrientedBox3D(0.5 * (xmin + xmax), 0.5 * (ymin + ymax), 0.5 * height,
                                           ymax - ymin, xmax - xmin, height, 0.0))
    for b in layout.barriers:
        if rng.random() < spec.occluder_density:
            occluders.append(b)

    n = spec.n_frames
    occ = _Occupancy(n, occluders)
    tracks: list[list[OrientedBox3D]] = []

    def place(choose) -> list[OrientedBox3D]:
        for _ in range(MAX_ATTEMPTS):
            track = choose()
            if track is not None and occ.free(track):
                occ.add(track)
                return track
        raise ValueError(
            f"could not place actor {len(tracks)} of {spec.archetype.value} "
            f"without overlap after {MAX_ATTEMPTS} attempts")

    weights = np.asarray(layout.path_weights, dtype=np.float64)
    weights = weights / weights.sum()

    def moving(vt: VehicleType | None = None):
        def choose():
            kind = vt or CATALOG[int(rng.choice(3, p=layout.type_weights))]
            path = layout.paths[int(rng.choice(len(layout.paths), p=weights))]
            speed = float(rng.uniform(6.0, 12.0))
            travel = speed * FRAME_DT * (n - 1)
            if path.length <= travel:
                return None
            s0 = float(rng.uniform(0.0, path.length - travel))
            x0, y0, _ = path.at(s0)
            x1, y1, _ = path.at(s0 + travel)
            if not (_in_spawn(x0, y0, layout.spawn) and _in_spawn(x1, y1, layout.spawn)):
                return None
            return _track(path, s0, speed, kind, n)
        return choose

    def slotted(path_idx: int, s_lo: float, s_hi: float):
        path = layout.paths[path_idx]

        def choose():
            speed = float(rng.uniform(6.0, 10.0))
            return _track(path, float(rng.uniform(s_lo, s_hi)), speed, SEDAN, n)
        return choose

    def parked():
        def choose():
            x, y, yaw = layout.parking[int(rng.integers(len(layout.parking)))]
            kind = CATALOG[int(rng.choice(2, p=(0.75, 0.25)))]
            return [OrientedBox3D(x, y, 0.5 * kind.h, kind.w, kind.l, kind.h, yaw)] * n
        return choose

    for i in range(spec.n_vehicle_agents):
        if i < len(layout.vehicle_slots):
            tracks.append(place(slotted(*layout.vehicle_slots[i])))
        else:
            tracks.append(place(moving(SEDAN)))

    n_parked = int(round(layout.parked_fraction * spec.n_actors)) if layout.parking else 0
    for i in range(spec.n_actors):
        tracks.append(place(parked() if i < n_parked else moving()))

    infra_h = INFRA_SENSOR_HEIGHT[spec.regime]
    agents: list[AgentSpec] = []
    for i in range(spec.n_vehicle_agents):
        b = tracks[i][0]
        agents.append(AgentSpec(f"V{i}", AgentKind.VEHICLE, Pose(b.x, b.y, VEHICLE_SENSOR_HEIGHT, b.yaw),
                                is_ego=(i == 0), actor_index=i))
    for k in range(spec.n_infra_agents):
        if k < len(layout.infra_slots):
            x, y, yaw = layout.infra_slots[k]
        else:
            x, y, yaw = layout.infra_slots[0][0] - 2.0 * k, layout.infra_slots[0][1], layout.infra_slots[0][2]
        agents.append(AgentSpec(f"I{k}", AgentKind.INFRASTRUCTURE, Pose(x, y, infra_h, yaw)))

    frames = []
    for f in range(n):
        poses = []
        for a in agents:
            if a.actor_index is None:
                poses.append(a.mount_pose)
            else:
                b = tracks[a.actor_index][f]
                poses.append(Pose(b.x, b.y, VEHICLE_SENSOR_HEIGHT, b.yaw))
        frames.append(Frame(tuple(t[f] for t in tracks), tuple(poses)))

    return Scene(spec=spec, occluders=tuple(occluders), frames=tuple(frames), agents=tuple(agents))


def ground_truth(scene: Scene, frame: int, range_: "DetectionRange", ego_pose: Pose) -> list[OrientedBox3D]:
    """Actors whose ego-frame centers fall inside ``range_``, expressed in the ego frame.

    The ego's own body (the actor whose footprint contains the ego position)
    is left out.
    """
    scene._check_frame(frame)
    out = []
    for b in scene.frames[frame].actors:
        if _contains_xy(b, ego_pose.x, ego_pose.y):
            continue
        local = transform_box(b, Pose(), ego_pose)
        if range_.contains(local.x, local.y, local.z):
            out.append(local)
    return out


def _contains_xy(b: OrientedBox3D, x: float, y: float) -> bool:
    c, s = math.cos(b.yaw), math.sin(b.yaw)
    dx, dy = x - b.x, y - b.y
    return abs(c * dx + s * dy) <= 0.5 * b.l and abs(-s * dx + c * dy) <= 0.5 * b.w


def with_seed(spec: ScenarioSpec, seed: int) -> ScenarioSpec:
    return replace(spec, seed=seed)

"""Experiment runner: scene suites through sensing, sharing, fusion, and scoring.

A job is one (scenario, seed) pair. It generates the scene once, caches every
LiDAR sweep it needs, and evaluates each noise setting of the experiment.
Jobs run in a process pool and results are gathered in submission order, so
reports do not depend on the worker count.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .channel import ChannelConfig, NoiseSetting, share
from .evaluation import EvalReport, SceneResult, evaluate_scene, report
from .fusion import (RESOLUTION, BevGrid, DetectionRange, FusionMethod, FusionVariant, RangeShape, detect,
                     extract, fuse, late_fuse)
from .geometry import OrientedBox3D, Pose, transform_to_frame
from .scene import AgentKind, AgentSpec, Archetype, Scene, ScenarioSpec, generate, ground_truth
from .sensing import PointCloud, raycast

LATE_NMS_IOU = 0.1
DEFAULT_SEEDS = (0, 1, 2, 3, 4)


class CPMode(str, enum.Enum):
    NO_FUSION = "NoFusion"
    V2V = "V2V"
    V2X = "V2X"
    I2X = "I2X"


class ConfigError(ValueError):
    """An experiment configuration violates its invariants."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One collaborative-perception configuration over a scenario suite.

    Attributes
    ----------
    name : str
    cp_mode : CPMode
    scenarios : tuple of ScenarioSpec
        Templates; each is run once per entry of ``seeds``.
    seeds : tuple of int
    noise : tuple of NoiseSetting
        One report is produced per setting.
    range_shape : RangeShape or None
        Force a detection-range shape; None uses the ego kind's default.
    fusion : FusionMethod
    nofusion_ego : AgentKind
        Which agent senses alone in ``NoFusion`` mode.
    channel_seed : int
    resolution : float
    """

    name: str = "experiment"
    cp_mode: CPMode = CPMode.V2X
    scenarios: tuple[ScenarioSpec, ...] = ()
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    noise: tuple[NoiseSetting, ...] = (NoiseSetting.perfect(),)
    range_shape: RangeShape | None = None
    fusion: FusionMethod = FusionMethod()
    nofusion_ego: AgentKind = AgentKind.VEHICLE
    channel_seed: int = 0
    resolution: float = RESOLUTION

    def __post_init__(self) -> None:
        object.__setattr__(self, "cp_mode", CPMode(self.cp_mode))
        object.__setattr__(self, "nofusion_ego", AgentKind(self.nofusion_ego))
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "noise", tuple(self.noise))
        if self.range_shape is not None:
            object.__setattr__(self, "range_shape", RangeShape(self.range_shape))
        self.validate()

    @property
    def regime(self) -> str:
        return self.scenarios[0].regime if self.scenarios else "v2xset"

    def validate(self) -> None:
        if not self.scenarios:
            raise ConfigError("an experiment needs at least one scenario")
        if not self.seeds:
            raise ConfigError("an experiment needs at least one seed")
        if not self.noise:
            raise ConfigError("an experiment needs at least one noise setting")
        if len({s.regime for s in self.scenarios}) != 1:
            raise ConfigError("all scenarios of an experiment must share one regime")
        if self.resolution <= 0:
            raise ConfigError("resolution must be positive")
        if self.cp_mode is CPMode.NO_FUSION and self.fusion.variant is FusionVariant.WEIGHTED \
                and self.fusion.weights != (1.0,):
            raise ConfigError("NoFusion with weighted fusion needs weights (1.0,)")
        for s in self.scenarios:
            try:
                select_agents_for(s, self.cp_mode, self.nofusion_ego)
            except ValueError as exc:
                raise ConfigError(f"{s.archetype.value}: {exc}") from exc
            if self.range_shape is not None:
                try:
                    DetectionRange.preset(s.regime, AgentKind.VEHICLE, self.range_shape)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
        if self.fusion.variant is FusionVariant.WEIGHTED:
            for s in self.scenarios:
                ego, aux = select_agents_for(s, self.cp_mode, self.nofusion_ego)
                if len(self.fusion.weights) != 1 + len(aux):
                    raise ConfigError(f"weighted fusion needs {1 + len(aux)} weights for {s.archetype.value}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "cp_mode": self.cp_mode.value,
            "scenarios": [s.to_dict() for s in self.scenarios],
            "seeds": list(self.seeds),
            "noise": [n.to_dict() for n in self.noise],
            "range_shape": None if self.range_shape is None else self.range_shape.value,
            "fusion": self.fusion.to_dict(),
            "nofusion_ego": self.nofusion_ego.value,
            "channel_seed": self.channel_seed,
            "resolution": self.resolution,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(
            name=d.get("name", "experiment"),
            cp_mode=CPMode(d["cp_mode"]),
            scenarios=tuple(ScenarioSpec.from_dict(s) for s in d["scenarios"]),
            seeds=tuple(d.get("seeds", DEFAULT_SEEDS)),
            noise=tuple(NoiseSetting.from_dict(n) for n in d.get("noise", [NoiseSetting().to_dict()])),
            range_shape=d.get("range_shape"),
            fusion=FusionMethod.from_dict(d.get("fusion", FusionMethod().to_dict())),
            nofusion_ego=AgentKind(d.get("nofusion_ego", "V")),
            channel_seed=d.get("channel_seed", 0),
            resolution=d.get("resolution", RESOLUTION),
        )


def _agent_ids(spec: ScenarioSpec) -> tuple[list[str], list[str]]:
    return ([f"V{i}" for i in range(spec.n_vehicle_agents)], [f"I{k}" for k in range(spec.n_infra_agents)])


def select_agents_for(spec: ScenarioSpec, mode: CPMode, nofusion_ego: AgentKind = AgentKind.VEHICLE
                      ) -> tuple[str, list[str]]:
    """Ego and aux agent ids for a mode, decided from the scenario spec alone.

    V2V uses every vehicle. V2X swaps the last aux vehicle for the first
    infrastructure agent (or adds it when there is no aux vehicle to swap).
    I2X keeps the V2X agent set but makes the infrastructure the ego.
    """
    vs, infra = _agent_ids(spec)
    mode = CPMode(mode)
    if mode is CPMode.NO_FUSION:
        if AgentKind(nofusion_ego) is AgentKind.INFRASTRUCTURE:
            if not infra:
                raise ValueError("NoFusion with an infrastructure ego needs an infrastructure agent")
            return infra[0], []
        return vs[0], []
    if mode is CPMode.V2V:
        if len(vs) < 2:
            raise ValueError("V2V needs at least two vehicle agents")
        return vs[0], vs[1:]
    if not infra:
        raise ValueError(f"{mode.value} needs at least one infrastructure agent")
    aux_vehicles = vs[1:-1] if len(vs) > 1 else []
    if mode is CPMode.V2X:
        return vs[0], aux_vehicles + [infra[0]]
    return infra[0], [vs[0]] + aux_vehicles


def detection_range(cfg: ExperimentConfig, kind: AgentKind) -> DetectionRange:
    return DetectionRange.preset(cfg.regime, kind, cfg.range_shape)


# ---------------------------------------------------------------------------
# per-frame pipeline


def _origins(poses: Sequence[Pose], ego: Pose) -> list[tuple[float, float]]:
    out = []
    for p in poses:
        q = transform_to_frame(np.array([[p.x, p.y, p.z]]), Pose(), ego)[0]
        out.append((float(q[0]), float(q[1])))
    return out


def perceive(scene: Scene, frame: int, ego: AgentSpec, aux: Sequence[AgentSpec], noise: NoiseSetting,
             cfg: ExperimentConfig, sense: Callable[[AgentSpec, int], PointCloud]) -> list[OrientedBox3D]:
    """Predicted boxes in the ego frame for one frame."""
    channel = ChannelConfig(noise, cfg.channel_seed)
    msgs = share(scene, frame, ego, aux, channel, sense)
    ego_pose = msgs[0].reported_pose
    rng_ego = detection_range(cfg, ego.kind)
    ground = -ego_pose.z
    v = cfg.fusion.variant
    if v is FusionVariant.LATE:
        per_agent, poses = [], []
        for m in msgs:
            r = detection_range(cfg, m.agent_kind)
            g = extract(m.payload, r, cfg.resolution, ground_z=-m.reported_pose.z)
            per_agent.append(detect(g))
            poses.append(m.reported_pose)
        merged = late_fuse(per_agent, poses, LATE_NMS_IOU)
        return [b for b in merged if rng_ego.contains(b.x, b.y)]
    clouds = [transform_to_frame(m.payload, m.reported_pose, ego_pose) for m in msgs]
    origins = _origins([m.reported_pose for m in msgs], ego_pose)
    if v is FusionVariant.EARLY:
        grid = extract(np.concatenate(clouds, axis=0), rng_ego, cfg.resolution, ground)
    else:
        grids = [extract(c, rng_ego, cfg.resolution, ground) for c in clouds]
        method = cfg.fusion
        if v is FusionVariant.WEIGHTED and len(grids) == 1:
            method = FusionMethod(FusionVariant.SUM)
        grid = fuse(grids[0], grids[1:], method)
    return detect(grid, origins=origins)


@dataclass(frozen=True)
class _Job:
    cfg: ExperimentConfig
    spec: ScenarioSpec


def _run_job(job: _Job) -> list[SceneResult]:
    cfg, spec = job.cfg, job.spec
    scene = generate(spec)
    ego_id, aux_ids = select_agents_for(spec, cfg.cp_mode, cfg.nofusion_ego)
    ego = scene.agent(ego_id)
    aux = [scene.agent(a) for a in aux_ids]
    cache: dict[tuple[str, int], PointCloud] = {}

    def sense(agent: AgentSpec, f: int) -> PointCloud:
        key = (agent.agent_id, f)
        if key not in cache:
            cache[key] = raycast(scene, f, agent)
        return cache[key]

    rng_ego = detection_range(cfg, ego.kind)
    gts = [ground_truth(scene, f, rng_ego, scene.agent_pose(ego_id, f)) for f in range(scene.n_frames)]
    out = []
    for noise in cfg.noise:
        preds = [perceive(scene, f, ego, aux, noise, cfg, sense) for f in range(scene.n_frames)]
        out.append(evaluate_scene(scene.scene_id, spec.seed, preds, gts))
    return out


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> list[EvalReport]:
    """Run every (scenario, seed) job and return one report per noise setting."""
    cfg.validate()
    jobs = [_Job(cfg, replace(s, seed=seed)) for s in cfg.scenarios for seed in cfg.seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    base = cfg.to_dict()
    del base["noise"]
    agents = {}
    for s in cfg.scenarios:
        ego, aux = select_agents_for(s, cfg.cp_mode, cfg.nofusion_ego)
        agents[s.archetype.value] = {"ego": ego, "aux": aux}
    reports = []
    for k, noise in enumerate(cfg.noise):
        conf = {**base, "noise": noise.to_dict(), "noise_label": noise.label, "agents": agents,
                "range": detection_range(cfg, _ego_kind(cfg)).to_dict(),
                "range_tag": detection_range(cfg, _ego_kind(cfg)).shape_tag.value,
                "fusion_label": cfg.fusion.label}
        reports.append(report([r[k] for r in results], conf))
    return reports


def _ego_kind(cfg: ExperimentConfig) -> AgentKind:
    ego, _ = select_agents_for(cfg.scenarios[0], cfg.cp_mode, cfg.nofusion_ego)
    return AgentKind.VEHICLE if ego.startswith("V") else AgentKind.INFRASTRUCTURE

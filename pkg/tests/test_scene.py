from __future__ import annotations

import math
from dataclasses import replace

import pytest

from infracp.fusion import DetectionRange
from infracp.geometry import OrientedBox3D, Pose, bev_iou
from infracp.scene import (CATALOG, SCENE_SCHEMA, AgentKind, AgentSpec, Archetype, Frame, Scene, ScenarioSpec,
                           generate, ground_truth)
from infracp.sensing import points_on_actor, raycast

ARCHETYPES = list(Archetype)


@pytest.fixture(scope="module")
def scenes():
    return {a: generate(ScenarioSpec(a, seed=3)) for a in ARCHETYPES}


class TestSpec:
    def test_needs_a_vehicle(self):
        with pytest.raises(ValueError):
            ScenarioSpec(Archetype.MERGE_RAMP, n_vehicle_agents=0)

    @pytest.mark.parametrize("kw", [{"n_actors": -1}, {"n_frames": 0}, {"occluder_density": 1.5},
                                    {"seed": -1}, {"seed": 2**64}, {"regime": "carla"}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ScenarioSpec(Archetype.FOUR_WAY, **kw)

    def test_round_trip(self):
        s = ScenarioSpec(Archetype.TWIN, n_actors=3, seed=2**63)
        assert ScenarioSpec.from_dict(s.to_dict()) == s

    @pytest.mark.parametrize("kind,z", [(AgentKind.VEHICLE, 1.2), (AgentKind.VEHICLE, 3.0),
                                        (AgentKind.INFRASTRUCTURE, 3.5), (AgentKind.INFRASTRUCTURE, 8.5)])
    def test_agent_height_bounds(self, kind, z):
        with pytest.raises(ValueError):
            AgentSpec("X0", kind, Pose(0, 0, z, 0))


class TestGenerate:
    def test_deterministic(self):
        spec = ScenarioSpec(Archetype.FOUR_WAY, 2, 1, 10, seed=7)
        assert generate(spec).to_json() == generate(spec).to_json()

    def test_seed_matters(self):
        a = generate(ScenarioSpec(Archetype.FOUR_WAY, seed=1))
        b = generate(ScenarioSpec(Archetype.FOUR_WAY, seed=2))
        assert a.to_json() != b.to_json()

    @pytest.mark.parametrize("arch", ARCHETYPES)
    def test_no_background_actors(self, arch):
        spec = ScenarioSpec(arch, n_actors=0, n_frames=3)
        scene = generate(spec)
        # only the agent vehicles' own bodies remain
        assert all(len(f.actors) == spec.n_vehicle_agents for f in scene.frames)
        assert scene.occluders

    @pytest.mark.parametrize("arch", ARCHETYPES)
    def test_invariants(self, scenes, arch):
        scene = scenes[arch]
        spec = scene.spec
        assert scene.n_frames == spec.n_frames
        assert len(scene.frames[0].actors) == spec.n_vehicle_agents + spec.n_actors
        for f in scene.frames:
            for a in f.actors:
                for o in scene.occluders:
                    assert bev_iou(a, o) == 0.0
        veh = [p.z for f in scene.frames for a, p in zip(scene.agents, f.agent_poses)
               if a.kind is AgentKind.VEHICLE]
        infra = [a.mount_pose.z for a in scene.infrastructure()]
        assert min(infra) > max(veh)
        sizes = {(t.w, t.l, t.h) for t in CATALOG}
        assert all((b.w, b.l, b.h) in sizes for f in scene.frames for b in f.actors)

    @pytest.mark.parametrize("arch", ARCHETYPES)
    def test_vehicle_agents_ride_their_actor(self, scenes, arch):
        scene = scenes[arch]
        for f in scene.frames:
            for a, p in zip(scene.agents, f.agent_poses):
                if a.actor_index is not None:
                    body = f.actors[a.actor_index]
                    assert (p.x, p.y) == (body.x, body.y)
                    assert math.isclose(math.cos(p.yaw - body.yaw), 1.0, abs_tol=1e-12)

    def test_overfull_scene_rejected(self):
        with pytest.raises(ValueError, match="overlap"):
            generate(ScenarioSpec(Archetype.MERGE_RAMP, n_actors=2000, n_frames=2))

    def test_json_round_trip(self, scenes):
        for scene in scenes.values():
            again = Scene.from_json(scene.to_json())
            assert again == scene
            assert again.to_json() == scene.to_json()

    def test_json_schema_checked(self, scenes):
        d = scenes[Archetype.MERGE_RAMP].to_dict()
        assert d["schema"] == SCENE_SCHEMA
        d["version"] = 99
        with pytest.raises(ValueError):
            Scene.from_dict(d)

    def test_twin_infrastructure_at_one_junction(self):
        for seed in range(3):
            scene = generate(ScenarioSpec(Archetype.TWIN, seed=seed))
            infra = scene.infrastructure()[0].mount_pose
            ego = scene.agent_pose("V0", 0)
            aux = scene.agent_pose("V1", 0)
            # infrastructure sits at the ego's junction; the aux vehicle is at the other one
            assert math.hypot(infra.x, infra.y) < 20
            assert math.hypot(aux.x - infra.x, aux.y - infra.y) > 100
            assert math.hypot(ego.x - infra.x, ego.y - infra.y) < math.hypot(aux.x - infra.x, aux.y - infra.y)


def test_merge_ramp_hides_traffic_from_vehicles_only():
    """Some actor is unseen by every vehicle agent yet seen by the infrastructure."""
    for seed in range(3):
        scene = generate(ScenarioSpec(Archetype.MERGE_RAMP, seed=seed, n_frames=1))
        poses = {a.agent_id: scene.agent_pose(a.agent_id, 0) for a in scene.agents}
        clouds = {a.agent_id: raycast(scene, 0, a) for a in scene.agents}
        found = False
        for i, actor in enumerate(scene.frames[0].actors):
            if i < scene.spec.n_vehicle_agents:
                continue
            seen_v = [points_on_actor(clouds[a.agent_id], actor, poses[a.agent_id]) for a in scene.vehicles()]
            seen_i = [points_on_actor(clouds[a.agent_id], actor, poses[a.agent_id]) for a in scene.infrastructure()]
            if max(seen_v) == 0 and max(seen_i) > 0:
                found = True
                break
        assert found, f"seed {seed}"


class TestGroundTruth:
    @staticmethod
    def scene_with(actors):
        spec = ScenarioSpec(Archetype.FOUR_WAY, n_vehicle_agents=1, n_infra_agents=0, n_actors=len(actors),
                            n_frames=1)
        ego = AgentSpec("V0", AgentKind.VEHICLE, Pose(0, 0, 1.9, 0), True, None)
        return Scene(spec, (), (Frame(tuple(actors), (ego.mount_pose,)),), (ego,))

    def test_z_inside_vehicle_range(self):
        # ego-frame z = -1 with the sensor at 1.9 m means world z = 0.9
        scene = self.scene_with([OrientedBox3D(5, 0, 0.9, 2, 4.5, 1.6)])
        rng = DetectionRange.preset("v2xset", AgentKind.VEHICLE)
        gt = ground_truth(scene, 0, rng, scene.agent_pose("V0", 0))
        assert len(gt) == 1 and gt[0].z == pytest.approx(-1.0)

    def test_x_outside_range(self):
        scene = self.scene_with([OrientedBox3D(150, 0, 0.8, 2, 4.5, 1.6)])
        rng = DetectionRange.preset("v2xset", AgentKind.VEHICLE)
        assert ground_truth(scene, 0, rng, scene.agent_pose("V0", 0)) == []

    def test_empty(self):
        scene = self.scene_with([])
        rng = DetectionRange.preset("v2xset", AgentKind.VEHICLE)
        assert ground_truth(scene, 0, rng, Pose(0, 0, 1.9, 0)) == []

    def test_frame_bounds(self):
        scene = self.scene_with([])
        rng = DetectionRange.preset("v2xset", AgentKind.VEHICLE)
        with pytest.raises(IndexError):
            ground_truth(scene, 1, rng, Pose(0, 0, 1.9, 0))

    def test_ego_body_excluded_and_frame_rotated(self):
        scene = self.scene_with([OrientedBox3D(0, 0, 0.8, 2, 4.5, 1.6), OrientedBox3D(0, 10, 0.8, 2, 4.5, 1.6)])
        rng = DetectionRange.preset("v2xset", AgentKind.VEHICLE)
        gt = ground_truth(scene, 0, rng, Pose(0, 0, 1.9, math.pi / 2))
        assert len(gt) == 1
        assert (gt[0].x, gt[0].y) == pytest.approx((10.0, 0.0))

    @pytest.mark.parametrize("arch", ARCHETYPES)
    def test_generated_frames(self, scenes, arch):
        scene = scenes[arch]
        rng = DetectionRange.preset("v2xset", AgentKind.VEHICLE)
        ego = scene.agent_pose("V0", 0)
        gt = ground_truth(scene, 0, rng, ego)
        assert gt
        assert all(rng.contains(b.x, b.y, b.z) for b in gt)
        assert len(gt) < len(scene.frames[0].actors)


def test_other_regime_uses_taller_mast():
    scene = generate(replace(ScenarioSpec(Archetype.FOUR_WAY, n_actors=2, n_frames=1), regime="v2xsim"))
    assert scene.infrastructure()[0].mount_pose.z == pytest.approx(7.4)

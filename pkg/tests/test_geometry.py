from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infracp.geometry import (Label, OrientedBox3D, Pose, Ray, bev_iou, compose, normalize_angle, nms,
                              points_in_box, ray_box_intersect, transform_box, transform_to_frame)

from oracles import nms_reference, ray_march, sampled_iou

# frozen output of oracles.sampled_iou for two concentric 2x2 squares at yaw 0 and pi/4
ROTATED_SQUARES_IOU = 0.7072192217


def random_box(rng, spread=3.0, conf=False):
    return OrientedBox3D(rng.uniform(-spread, spread), rng.uniform(-spread, spread), rng.uniform(-1, 1),
                         rng.uniform(0.3, 3.0), rng.uniform(0.3, 6.0), rng.uniform(0.3, 3.0),
                         rng.uniform(-math.pi, math.pi), confidence=rng.random() if conf else 1.0)


finite = st.floats(-1e3, 1e3, allow_nan=False)
angles = st.floats(-10.0, 10.0, allow_nan=False)
sizes = st.floats(0.2, 10.0)
poses = st.builds(Pose, finite, finite, st.floats(-10, 10), angles)
boxes = st.builds(OrientedBox3D, st.floats(-20, 20), st.floats(-20, 20), st.floats(-2, 2), sizes, sizes, sizes,
                  angles)


class TestTypes:
    def test_pose_yaw_normalized(self):
        assert Pose(0, 0, 0, 3 * math.pi).yaw == pytest.approx(math.pi)
        assert Pose(0, 0, 0, -math.pi).yaw == pytest.approx(math.pi)

    @given(angles)
    def test_normalize_range(self, a):
        v = normalize_angle(a)
        assert -math.pi < v <= math.pi
        assert math.isclose(math.cos(v), math.cos(a), abs_tol=1e-9)

    def test_pose_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Pose(float("nan"), 0, 0, 0)

    @pytest.mark.parametrize("size", [(0, 1, 1), (1, -1, 1), (1, 1, 0)])
    def test_box_rejects_bad_size(self, size):
        with pytest.raises(ValueError):
            OrientedBox3D(0, 0, 0, *size)

    def test_box_rejects_bad_confidence(self):
        with pytest.raises(ValueError):
            OrientedBox3D(0, 0, 0, 1, 1, 1, confidence=1.5)

    def test_box_round_trip(self):
        b = OrientedBox3D(1, 2, 3, 1.5, 4, 2, 0.3, Label.NOT_VEHICLE, 0.4)
        assert OrientedBox3D.from_dict(b.to_dict()) == b

    def test_ray_needs_unit_direction(self):
        with pytest.raises(ValueError):
            Ray((0, 0, 0), (1, 1, 0))


class TestTransform:
    def test_quarter_turn(self):
        out = transform_to_frame(np.array([[1.0, 0, 0]]), Pose(0, 0, 0, math.pi / 2), Pose())
        np.testing.assert_allclose(out, [[0, 1, 0]], atol=1e-12)

    def test_identity(self):
        pts = np.random.default_rng(0).normal(size=(20, 3))
        p = Pose(3, 4, 1, 0.7)
        np.testing.assert_array_equal(transform_to_frame(pts, p, p), pts)

    @settings(max_examples=200)
    @given(poses, poses)
    def test_round_trip(self, a, b):
        pts = np.random.default_rng(1).uniform(-100, 100, size=(32, 3))
        back = transform_to_frame(transform_to_frame(pts, a, b), b, a)
        assert np.abs(back - pts).max() < 1e-9

    @given(poses, poses, boxes)
    def test_box_transform_matches_points(self, a, b, box):
        moved = transform_box(box, a, b)
        center = transform_to_frame(np.array([box.center]), a, b)[0]
        np.testing.assert_allclose(moved.center, center, atol=1e-9)
        assert math.isclose(math.cos(moved.yaw - (box.yaw + a.yaw - b.yaw)), 1.0, abs_tol=1e-9)

    @given(poses, poses)
    def test_compose_consistent(self, a, b):
        rel = compose(a, b)
        origin = transform_to_frame(np.zeros((1, 3)), a, b)[0]
        np.testing.assert_allclose([rel.x, rel.y, rel.z], origin, atol=1e-9)


class TestBevIoU:
    def test_identical(self):
        b = OrientedBox3D(1, 2, 0, 2, 4, 1.5, 0.4)
        assert bev_iou(b, b) == pytest.approx(1.0)

    def test_offset_unit_squares(self):
        a = OrientedBox3D(0, 0, 0, 1, 1, 1)
        b = OrientedBox3D(0.5, 0, 0, 1, 1, 1)
        assert bev_iou(a, b) == pytest.approx(1 / 3)

    def test_disjoint(self):
        assert bev_iou(OrientedBox3D(0, 0, 0, 1, 1, 1), OrientedBox3D(5, 0, 0, 1, 1, 1)) == 0.0

    def test_touching_edge_is_zero(self):
        assert bev_iou(OrientedBox3D(0, 0, 0, 1, 1, 1), OrientedBox3D(1, 0, 0, 1, 1, 1)) == 0.0

    def test_rotated_squares_frozen_oracle(self):
        a = OrientedBox3D(0, 0, 0, 2, 2, 1, 0.0)
        b = OrientedBox3D(0, 0, 0, 2, 2, 1, math.pi / 4)
        assert abs(sampled_iou(a, b) - ROTATED_SQUARES_IOU) < 1e-9
        assert abs(bev_iou(a, b) - ROTATED_SQUARES_IOU) < 1e-3
        # octagon area 8(sqrt2 - 1) over union 8 - 8(sqrt2 - 1)
        exact = (math.sqrt(2) - 1) / (2 - math.sqrt(2))
        assert bev_iou(a, b) == pytest.approx(exact, abs=1e-12)

    def test_against_sampling_oracle(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(200):
            a, b = random_box(rng, 1.5), random_box(rng, 1.5)
            worst = max(worst, abs(bev_iou(a, b) - sampled_iou(a, b)))
        assert worst < 1e-3

    @given(boxes, boxes)
    def test_symmetric_and_bounded(self, a, b):
        v = bev_iou(a, b)
        assert v == bev_iou(b, a)
        assert 0.0 <= v <= 1.0

    @given(boxes, boxes, angles, st.floats(-5, 5), st.floats(-5, 5))
    def test_rotation_invariant(self, a, b, phi, px, py):
        p = Pose(px, py, 0, phi)
        before = bev_iou(a, b)
        after = bev_iou(transform_box(a, p), transform_box(b, p))
        assert abs(before - after) < 1e-9


class TestRayBox:
    def test_slab(self):
        r = Ray((-10, 0, 0), (1, 0, 0))
        assert ray_box_intersect(r, OrientedBox3D(0, 0, 0, 1, 1, 1)) == pytest.approx(9.5)

    def test_pointing_away(self):
        assert ray_box_intersect(Ray((-10, 0, 0), (-1, 0, 0)), OrientedBox3D(0, 0, 0, 1, 1, 1)) is None

    def test_parallel_miss(self):
        assert ray_box_intersect(Ray((-10, 2, 0), (1, 0, 0)), OrientedBox3D(0, 0, 0, 1, 1, 1)) is None

    def test_origin_inside_returns_exit(self):
        assert ray_box_intersect(Ray((0, 0, 0), (1, 0, 0)), OrientedBox3D(0, 0, 0, 1, 4, 1)) == pytest.approx(2.0)

    def test_against_ray_march(self):
        rng = np.random.default_rng(11)
        worst, checked = 0.0, 0
        for k in range(1000):
            box = random_box(rng, 2.0)
            # origin outside the box's bounding sphere
            r = math.sqrt(box.l ** 2 + box.w ** 2 + box.h ** 2) / 2
            dirn = rng.normal(size=3)
            origin = np.array(box.center) + dirn / np.linalg.norm(dirn) * (r + rng.uniform(0.5, 8.0))
            if k % 2 == 0:
                # aim at an interior point so most rays hit
                target = np.array(box.center) + rng.uniform(-0.4, 0.4, 3) * [box.l, box.w, box.h]
                d = target - origin
            else:
                d = rng.normal(size=3)
            d = d / np.linalg.norm(d)
            got = ray_box_intersect(Ray(tuple(origin), tuple(d)), box)
            want = ray_march(origin, d, box, t_max=float(np.linalg.norm(origin - box.center) + r + 0.01))
            if want is None:
                # a chord shorter than the coarse march step may slip through
                assert got is None or _chord(origin, d, box, got) < 1e-3
                continue
            assert got is not None
            worst = max(worst, abs(got - want))
            checked += 1
        assert checked > 400
        assert worst < 1e-3


def _chord(origin, d, box, t):
    t2 = t
    while t2 < t + 1e-3 and points_in_box(np.asarray(origin) + t2 * np.asarray(d), box, 1e-9).all():
        t2 += 1e-6
    return t2 - t


class TestNms:
    def test_single(self):
        b = OrientedBox3D(0, 0, 0, 1, 2, 1, confidence=0.3)
        assert nms([b], 0.5) == [b]

    def test_duplicates(self):
        a = OrientedBox3D(0, 0, 0, 1, 2, 1, confidence=0.9)
        b = OrientedBox3D(0, 0, 0, 1, 2, 1, confidence=0.8)
        assert nms([b, a], 0.5) == [a]

    def test_tie_keeps_earlier(self):
        a = OrientedBox3D(0, 0, 0, 1, 2, 1, confidence=0.5)
        b = OrientedBox3D(0.01, 0, 0, 1, 2, 1, confidence=0.5)
        assert nms([a, b], 0.5) == [a]
        assert nms([b, a], 0.5) == [b]

    @pytest.mark.parametrize("thr", [0.0, 1.0, -0.1])
    def test_rejects_threshold(self, thr):
        with pytest.raises(ValueError):
            nms([], thr)

    def test_against_reference(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            bs = [random_box(rng, 4.0, conf=True) for _ in range(10)]
            thr = rng.uniform(0.05, 0.9)
            got = nms(bs, thr)
            assert got == nms_reference(bs, thr, bev_iou)
            assert [b.confidence for b in got] == sorted((b.confidence for b in got), reverse=True)
            for i in range(len(got)):
                for j in range(i + 1, len(got)):
                    assert bev_iou(got[i], got[j]) < thr


class TestPointsInBox:
    def test_margin(self):
        b = OrientedBox3D(0, 0, 0, 2, 2, 2)
        pts = np.array([[1.005, 0, 0], [1.02, 0, 0]])
        assert points_in_box(pts, b, 0.01).tolist() == [True, False]

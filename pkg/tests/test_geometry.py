import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balanced3d import Box3D, bev_iou, global_transform, points_in_box, synth_scene
from balanced3d.geometry import (
    clip_convex,
    polygon_area,
    sample_transform_params,
    transform_box,
)

from conftest import corner_frame_contains, monte_carlo_bev_iou


def box(cx=0, cy=0, cz=0, l=1, w=1, h=1, yaw=0, **kw):
    return Box3D(cx=cx, cy=cy, cz=cz, l=l, w=w, h=h, yaw=yaw, **kw)


finite_boxes = st.builds(
    box,
    cx=st.floats(-20, 20), cy=st.floats(-20, 20), cz=st.floats(-3, 3),
    l=st.floats(0.3, 10), w=st.floats(0.3, 10), h=st.floats(0.3, 5),
    yaw=st.floats(-math.pi, math.pi),
)


class TestGlobalTransform:
    def test_flip_point_and_box(self):
        scene = synth_scene(1, {}, ground_points=10)
        scene = dataclasses.replace(
            scene,
            points=np.array([[1.0, 2.0, 0.0, 0.5, 0.0]]),
            labels=[box(yaw=0.3, vy=1.5)],
        )
        out = global_transform(scene, flip_y=True)
        np.testing.assert_allclose(out.points[0, :3], [1.0, -2.0, 0.0])
        assert out.labels[0].yaw == pytest.approx(-0.3)
        assert out.labels[0].vy == pytest.approx(-1.5)

    def test_identity_is_bit_exact(self):
        scene = synth_scene(2, {"car": 2}, ground_points=200)
        out = global_transform(scene)
        assert np.array_equal(out.points, scene.points)
        assert out.labels == scene.labels

    def test_scale_touches_sizes_and_center(self):
        b = box(cz=-1.0, l=4.0)
        out = transform_box(b, flip_y=False, scale=1.05, rot_z=0.0,
                            translate=(0, 0, 0))
        assert out.l == pytest.approx(4.2)
        assert out.cz == pytest.approx(-1.05)

    def test_translation_shifts_centers_only(self):
        b = box(l=4, w=2, h=1.5, yaw=0.4)
        out = transform_box(b, False, 1.0, 0.0, (1.0, -2.0, 0.5))
        assert (out.cx, out.cy, out.cz) == pytest.approx((1.0, -2.0, 0.5))
        assert (out.l, out.w, out.h, out.yaw) == (b.l, b.w, b.h, b.yaw)

    def test_rotation_rotates_velocity(self):
        b = box(vx=2.0, vy=0.0)
        out = transform_box(b, False, 1.0, math.pi / 2, (0, 0, 0))
        assert out.vx == pytest.approx(0.0, abs=1e-12)
        assert out.vy == pytest.approx(2.0)

    def test_scale_must_be_positive(self):
        scene = synth_scene(3, {}, ground_points=10)
        with pytest.raises(ValueError):
            global_transform(scene, scale=0.0)

    def test_param_sampler_ranges(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            flip, scale, rot, t = sample_transform_params(rng)
            assert 0.95 <= scale <= 1.05
            assert -0.3925 <= rot <= 0.3925
            assert all(abs(v) <= 0.6 + 1e-12 for v in t)

    @settings(max_examples=50)
    @given(finite_boxes,
           st.booleans(), st.floats(0.95, 1.05), st.floats(-0.4, 0.4),
           st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)))
    def test_containment_preserved(self, b, flip, scale, rot, translate):
        rng = np.random.default_rng(0)
        # strictly interior points, so the boundary epsilon cannot flip them
        local = rng.uniform(-0.45, 0.45, size=(30, 3)) * np.array([b.l, b.w, b.h])
        c, s = math.cos(b.yaw), math.sin(b.yaw)
        pts = np.zeros((30, 5))
        pts[:, 0] = c * local[:, 0] - s * local[:, 1] + b.cx
        pts[:, 1] = s * local[:, 0] + c * local[:, 1] + b.cy
        pts[:, 2] = local[:, 2] + b.cz
        assert points_in_box(pts, b).all()
        scene = synth_scene(1, {}, ground_points=1)
        scene = dataclasses.replace(scene, points=pts, labels=[b])
        out = global_transform(scene, flip, scale, rot, translate)
        assert points_in_box(out.points, out.labels[0]).all()


class TestPointsInBox:
    def test_center_inside(self):
        b = box(cx=3, cy=-1, cz=0.5, yaw=1.0)
        assert points_in_box(np.array([[3, -1, 0.5, 0, 0]]), b)[0]

    def test_corner_on_surface_inclusive(self):
        b = box(l=2, w=2, h=2)
        corner = np.array([[1.0, 1.0, 1.0, 0, 0]])
        assert points_in_box(corner, b)[0]

    def test_matches_corner_frame_oracle(self):
        rng = np.random.default_rng(10)
        b = box(cx=1.0, cy=-2.0, cz=0.3, l=3.0, w=1.4, h=1.8, yaw=0.77)
        pts = np.column_stack([
            rng.uniform(-4, 6, 300), rng.uniform(-6, 2, 300),
            rng.uniform(-2, 2, 300), np.zeros(300), np.zeros(300),
        ])
        mask = points_in_box(pts, b)
        oracle = np.array([corner_frame_contains(p, b) for p in pts])
        assert np.array_equal(mask, oracle)

    def test_empty_input(self):
        assert points_in_box(np.zeros((0, 5)), box()).shape == (0,)


class TestBevIou:
    def test_identical_boxes(self):
        b = box(l=3, w=1.5, yaw=0.3)
        assert bev_iou(b, b) == pytest.approx(1.0)

    def test_disjoint_boxes(self):
        assert bev_iou(box(), box(cx=10)) == 0.0

    def test_half_shifted_unit_squares(self):
        assert bev_iou(box(), box(cx=0.5)) == pytest.approx(1.0 / 3.0)

    @settings(max_examples=60)
    @given(finite_boxes, finite_boxes)
    def test_symmetric(self, a, b):
        assert bev_iou(a, b) == pytest.approx(bev_iou(b, a), abs=1e-9)

    @settings(max_examples=40)
    @given(finite_boxes, finite_boxes,
           st.floats(-math.pi, math.pi), st.floats(-5, 5), st.floats(-5, 5))
    def test_rigid_invariance(self, a, b, rot, tx, ty):
        base = bev_iou(a, b)
        ta = transform_box(a, False, 1.0, rot, (tx, ty, 0))
        tb = transform_box(b, False, 1.0, rot, (tx, ty, 0))
        assert bev_iou(ta, tb) == pytest.approx(base, abs=1e-9)

    def test_monte_carlo_agreement(self):
        rng = np.random.default_rng(11)
        for trial in range(25):
            a = box(cx=rng.uniform(-2, 2), cy=rng.uniform(-2, 2),
                    l=rng.uniform(0.5, 4), w=rng.uniform(0.5, 4),
                    yaw=rng.uniform(-math.pi, math.pi))
            b = box(cx=rng.uniform(-2, 2), cy=rng.uniform(-2, 2),
                    l=rng.uniform(0.5, 4), w=rng.uniform(0.5, 4),
                    yaw=rng.uniform(-math.pi, math.pi))
            mc = monte_carlo_bev_iou(a, b, 10**6, seed=trial)
            assert bev_iou(a, b) == pytest.approx(mc, abs=3e-3)

    def test_in_unit_interval(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            a = box(cx=rng.uniform(-1, 1), cy=rng.uniform(-1, 1),
                    l=rng.uniform(0.3, 3), w=rng.uniform(0.3, 3),
                    yaw=rng.uniform(-math.pi, math.pi))
            b = box(cx=rng.uniform(-1, 1), cy=rng.uniform(-1, 1),
                    l=rng.uniform(0.3, 3), w=rng.uniform(0.3, 3),
                    yaw=rng.uniform(-math.pi, math.pi))
            assert 0.0 <= bev_iou(a, b) <= 1.0


class TestClipping:
    def test_full_overlap(self):
        square = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=float)
        assert polygon_area(clip_convex(square, square)) == pytest.approx(4.0)

    def test_no_overlap(self):
        a = np.array([[1, 1], [0, 1], [0, 0], [1, 0]], dtype=float)
        b = a + np.array([5.0, 0.0])
        assert polygon_area(clip_convex(a, b)) == 0.0

    def test_partial_overlap_area(self):
        a = np.array([[2, 2], [0, 2], [0, 0], [2, 0]], dtype=float)
        b = np.array([[3, 1], [1, 1], [1, -1], [3, -1]], dtype=float)
        assert polygon_area(clip_convex(a, b)) == pytest.approx(1.0)

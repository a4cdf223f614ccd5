"""Geometric primitives: global sample augmentation, point-in-box tests,
and rotated BEV IoU via convex polygon clipping."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .core import Box3D, _corners_bev, box_corners_bev, wrap_to_pi

_EPS = 1e-9


def transform_points(points: np.ndarray, flip_y: bool, scale: float,
                     rot_z: float, translate) -> np.ndarray:
    """Apply flip -> scale -> rotate -> translate to an (N, >=3) point array.

    Only the first three columns (x, y, z) are touched.
    """
    out = np.array(points, dtype=np.float64, copy=True)
    if out.shape[0] == 0:
        return out
    xyz = out[:, :3]
    if flip_y:
        xyz[:, 1] = -xyz[:, 1]
    xyz *= scale
    c, s = math.cos(rot_z), math.sin(rot_z)
    x, y = xyz[:, 0].copy(), xyz[:, 1].copy()
    xyz[:, 0] = c * x - s * y
    xyz[:, 1] = s * x + c * y
    xyz += np.asarray(translate, dtype=np.float64)
    out[:, :3] = xyz
    return out


def transform_box(box: Box3D, flip_y: bool, scale: float, rot_z: float, translate) -> Box3D:
    cx, cy, cz = box.cx, box.cy, box.cz
    yaw, vx, vy = box.yaw, box.vx, box.vy
    if flip_y:
        cy, yaw, vy = -cy, -yaw, -vy
    cx, cy, cz = cx * scale, cy * scale, cz * scale
    l, w, h = box.l * scale, box.w * scale, box.h * scale
    vx, vy = vx * scale, vy * scale
    c, s = math.cos(rot_z), math.sin(rot_z)
    cx, cy = c * cx - s * cy, s * cx + c * cy
    vx, vy = c * vx - s * vy, s * vx + c * vy
    yaw = wrap_to_pi(yaw + rot_z)
    tx, ty, tz = translate
    return dataclasses.replace(
        box, cx=cx + tx, cy=cy + ty, cz=cz + tz,
        l=l, w=w, h=h, yaw=yaw, vx=vx, vy=vy,
    )


def global_transform(sample, flip_y: bool = False, scale: float = 1.0,
                     rot_z: float = 0.0, translate=(0.0, 0.0, 0.0)):
    """Jointly augment a sample's points and boxes.

    Order of application is flip (y -> -y) then scale then z-rotation then
    translation; translation shifts positions only.
    """
    if not (scale > 0):
        raise ValueError(f"scale must be positive, got {scale}")
    points = transform_points(sample.points, flip_y, scale, rot_z, translate)
    labels = [transform_box(b, flip_y, scale, rot_z, translate) for b in sample.labels]
    return dataclasses.replace(sample, points=points, labels=labels)


def sample_transform_params(rng: np.random.Generator,
                            scale_range=(0.95, 1.05),
                            rot_range=(-0.3925, 0.3925),
                            translate_std=0.2):
    """Draw augmentation parameters at the production magnitudes.

    Translation per axis is N(0, translate_std) truncated at 3 sigma.
    """
    flip_y = bool(rng.integers(0, 2))
    scale = float(rng.uniform(*scale_range))
    rot_z = float(rng.uniform(*rot_range))
    t = rng.normal(0.0, translate_std, size=3)
    t = np.clip(t, -3.0 * translate_std, 3.0 * translate_std)
    return flip_y, scale, rot_z, tuple(t.tolist())


def points_in_box(points: np.ndarray, box: Box3D) -> np.ndarray:
    """Boolean mask of points inside the box, boundary inclusive.

    A point counts as inside when its box-local coordinates lie within
    [-l/2, l/2] x [-w/2, w/2] x [-h/2, h/2] (plus a 1e-9 slack for the
    rotation round-off).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    local = pts[:, :3] - np.array([box.cx, box.cy, box.cz])
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    lx = c * local[:, 0] + s * local[:, 1]
    ly = -s * local[:, 0] + c * local[:, 1]
    lz = local[:, 2]
    return (
        (np.abs(lx) <= 0.5 * box.l + _EPS)
        & (np.abs(ly) <= 0.5 * box.w + _EPS)
        & (np.abs(lz) <= 0.5 * box.h + _EPS)
    )


def points_in_bev_rect(points: np.ndarray, box: Box3D) -> np.ndarray:
    """Boolean mask of points whose (x, y) falls inside the box's BEV rectangle."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    dx = pts[:, 0] - box.cx
    dy = pts[:, 1] - box.cy
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    return (np.abs(lx) <= 0.5 * box.l + _EPS) & (np.abs(ly) <= 0.5 * box.w + _EPS)


def polygon_area(poly: np.ndarray) -> float:
    """Shoelace area of a simple polygon given as (N, 2) vertices."""
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def clip_convex(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of convex polygon `subject` by convex `clipper`.

    Both polygons must be in counter-clockwise order. Returns the (possibly
    empty) intersection polygon.
    """
    output = [tuple(p) for p in subject]
    n = len(clipper)
    for i in range(n):
        if not output:
            break
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        input_list = output
        output = []
        prev = input_list[-1]
        prev_side = ex * (prev[1] - ay) - ey * (prev[0] - ax)
        for cur in input_list:
            cur_side = ex * (cur[1] - ay) - ey * (cur[0] - ax)
            if cur_side >= -_EPS:
                if prev_side < -_EPS:
                    output.append(_segment_intersection(prev, cur, prev_side, cur_side))
                output.append(cur)
            elif prev_side >= -_EPS:
                output.append(_segment_intersection(prev, cur, prev_side, cur_side))
            prev, prev_side = cur, cur_side
    return np.array(output, dtype=np.float64) if output else np.zeros((0, 2))


def _segment_intersection(p, q, side_p, side_q):
    t = side_p / (side_p - side_q)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def bev_iou(a: Box3D, b: Box3D) -> float:
    """Intersection-over-union of two yaw-rotated BEV rectangles."""
    area_a = a.l * a.w
    area_b = b.l * b.w
    if area_a <= 0.0 or area_b <= 0.0:
        return 0.0
    # cheap reject: centers further apart than the summed circumradii
    ra = 0.5 * math.hypot(a.l, a.w)
    rb = 0.5 * math.hypot(b.l, b.w)
    if math.hypot(a.cx - b.cx, a.cy - b.cy) > ra + rb:
        return 0.0
    inter_poly = clip_convex(box_corners_bev(a), box_corners_bev(b))
    inter = polygon_area(inter_poly)
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def bev_iou_one_to_many(box: Box3D, centers_xy: np.ndarray, dims_lw: np.ndarray,
                        yaws: np.ndarray) -> np.ndarray:
    """IoU of one box against many, with a vectorized circumradius prefilter."""
    n = len(yaws)
    out = np.zeros(n, dtype=np.float64)
    if n == 0:
        return out
    r_other = 0.5 * np.hypot(dims_lw[:, 0], dims_lw[:, 1])
    r_box = 0.5 * math.hypot(box.l, box.w)
    dist = np.hypot(centers_xy[:, 0] - box.cx, centers_xy[:, 1] - box.cy)
    candidates = np.nonzero(dist <= r_box + r_other)[0]
    corners_a = box_corners_bev(box)
    area_a = box.l * box.w
    for i in candidates:
        l, w = dims_lw[i]
        corners_b = _corners_bev(centers_xy[i, 0], centers_xy[i, 1], l, w, yaws[i])
        inter = polygon_area(clip_convex(corners_a, corners_b))
        union = area_a + l * w - inter
        if union > 0.0:
            out[i] = min(max(inter / union, 0.0), 1.0)
    return out

"""Grouped anchor generation, target assignment, and box/direction encoding.

Classes are split across detection-head groups; each group owns a dense BEV
anchor grid with one size per class and two yaw bins (0 and pi/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CLASS_NAMES, Box3D, PipelineConfig, wrap_angle, wrap_to_pi
from .geometry import bev_iou_one_to_many

BACKGROUND = -1
IGNORE = -2

DIRECTION_OFFSET = math.pi / 4.0
NEGATIVE_GAP = 0.15  # negative threshold = positive threshold - this
ANCHOR_YAWS = (0.0, math.pi / 2.0)


@dataclass(frozen=True)
class GroupAnchors:
    """Anchors of one head group, laid out [class, iy, ix, yaw-bin]."""

    group_index: int
    class_ids: np.ndarray  # (N,) int32, global class id per anchor
    boxes: np.ndarray      # (N, 9): cx, cy, cz, l, w, h, yaw, vx, vy
    grid_shape: tuple      # (gx, gy)

    def __len__(self):
        return len(self.class_ids)


@dataclass(frozen=True)
class AnchorSet:
    groups: tuple  # of GroupAnchors

    def total(self) -> int:
        return sum(len(g) for g in self.groups)


@dataclass(frozen=True)
class TargetSet:
    """Per-anchor training targets for one group.

    cls_target holds the matched global class id, BACKGROUND (-1), or
    IGNORE (-2). Regression rows are finite only for foreground anchors.
    """

    cls_target: np.ndarray   # (N,) int32
    reg_target: np.ndarray   # (N, 9) float, NaN outside foreground
    dir_target: np.ndarray   # (N,) int8, -1 outside foreground
    reg_weight: np.ndarray   # (N,) float, 1 for foreground else 0

    @property
    def num_positives(self) -> int:
        return int((self.cls_target >= 0).sum())


def generate_anchors(config: PipelineConfig) -> AnchorSet:
    """Dense per-group anchors on the downscaled BEV grid."""
    nx, ny, _ = config.grid_dims
    ds = config.feature_map_downscale
    if nx % ds or ny % ds:
        raise ValueError(f"voxel grid {nx}x{ny} not divisible by downscale {ds}")
    gx, gy = nx // ds, ny // ds
    cell_x = config.voxel_size[0] * ds
    cell_y = config.voxel_size[1] * ds
    xs = config.range_min[0] + (np.arange(gx) + 0.5) * cell_x
    ys = config.range_min[1] + (np.arange(gy) + 0.5) * cell_y

    catalog = config.catalog
    groups = []
    for gi, group in enumerate(config.groups):
        per_class = gx * gy * len(ANCHOR_YAWS)
        n = per_class * len(group)
        boxes = np.zeros((n, 9), dtype=np.float64)
        class_ids = np.zeros(n, dtype=np.int32)
        row = 0
        for name in group:
            cid = catalog.class_id(name)
            l, w, h = catalog.anchor_sizes[name]
            z = catalog.anchor_z[name]
            # layout: iy outer, ix inner, yaw innermost
            cy_grid, cx_grid = np.meshgrid(ys, xs, indexing="ij")
            for k, yaw in enumerate(ANCHOR_YAWS):
                sl = slice(row + k, row + per_class, len(ANCHOR_YAWS))
                boxes[sl, 0] = cx_grid.ravel()
                boxes[sl, 1] = cy_grid.ravel()
                boxes[sl, 2] = z
                boxes[sl, 3] = l
                boxes[sl, 4] = w
                boxes[sl, 5] = h
                boxes[sl, 6] = yaw
            class_ids[row:row + per_class] = cid
            row += per_class
        groups.append(GroupAnchors(group_index=gi, class_ids=class_ids,
                                   boxes=boxes, grid_shape=(gx, gy)))
    return AnchorSet(groups=tuple(groups))


def direction_target(yaw: float, offset: float = DIRECTION_OFFSET) -> int:
    """Binary orientation bin; bin(yaw) always differs from bin(yaw + pi)."""
    return 0 if wrap_angle(yaw - offset, 2.0 * math.pi) < math.pi else 1


def direction_target_array(yaws: np.ndarray, offset: float = DIRECTION_OFFSET) -> np.ndarray:
    w = np.asarray(yaws, dtype=np.float64) - offset
    w = w - np.floor(w / (2.0 * np.pi)) * 2.0 * np.pi
    return (w >= np.pi).astype(np.int8)


def _wrap_half_pi(delta: np.ndarray) -> np.ndarray:
    """Wrap yaw residuals into (-pi/2, pi/2]."""
    w = delta - np.floor(delta / np.pi) * np.pi  # [0, pi)
    w = np.where(w > np.pi / 2.0, w - np.pi, w)
    return w


def encode_boxes(anchors: np.ndarray, gts: np.ndarray) -> np.ndarray:
    """Vectorized residual encoding, diagonal-normalized.

    Columns: dx, dy, dz, dl, dw, dh, dyaw, dvx, dvy. Velocities are passed
    through unnormalized (anchor velocity is zero).
    """
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 9)
    gts = np.asarray(gts, dtype=np.float64).reshape(-1, 9)
    if np.any(gts[:, 3:6] <= 0):
        raise ValueError("ground-truth sizes must be positive")
    diag = np.hypot(anchors[:, 3], anchors[:, 4])
    out = np.empty_like(gts)
    out[:, 0] = (gts[:, 0] - anchors[:, 0]) / diag
    out[:, 1] = (gts[:, 1] - anchors[:, 1]) / diag
    out[:, 2] = (gts[:, 2] - anchors[:, 2]) / anchors[:, 5]
    out[:, 3:6] = np.log(gts[:, 3:6] / anchors[:, 3:6])
    out[:, 6] = _wrap_half_pi(gts[:, 6] - anchors[:, 6])
    out[:, 7:9] = gts[:, 7:9]
    return out


def decode_boxes(anchors: np.ndarray, regs: np.ndarray,
                 dir_bins: np.ndarray) -> np.ndarray:
    """Exact inverse of encode_boxes; the direction bin resolves the pi
    ambiguity of the yaw residual."""
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 9)
    regs = np.asarray(regs, dtype=np.float64).reshape(-1, 9)
    dir_bins = np.asarray(dir_bins).reshape(-1)
    diag = np.hypot(anchors[:, 3], anchors[:, 4])
    out = np.empty_like(regs)
    out[:, 0] = regs[:, 0] * diag + anchors[:, 0]
    out[:, 1] = regs[:, 1] * diag + anchors[:, 1]
    out[:, 2] = regs[:, 2] * anchors[:, 5] + anchors[:, 2]
    out[:, 3:6] = np.exp(regs[:, 3:6]) * anchors[:, 3:6]
    yaw = anchors[:, 6] + regs[:, 6]
    flip = direction_target_array(yaw) != dir_bins
    yaw = np.where(flip, yaw + np.pi, yaw)
    out[:, 6] = _wrap_half_pi_to_pi(yaw)
    out[:, 7:9] = regs[:, 7:9]
    return out


def _wrap_half_pi_to_pi(yaw: np.ndarray) -> np.ndarray:
    w = yaw - np.floor(yaw / (2.0 * np.pi)) * 2.0 * np.pi
    return np.where(w > np.pi, w - 2.0 * np.pi, w)


def encode_box(anchor: Box3D, gt: Box3D) -> np.ndarray:
    """Scalar convenience wrapper around encode_boxes."""
    if not (anchor.l > 0 and anchor.w > 0 and anchor.h > 0):
        raise ValueError("anchor sizes must be positive")
    return encode_boxes(anchor.to_array()[None], gt.to_array()[None])[0]


def decode_box(anchor: Box3D, reg: np.ndarray, dir_bin: int) -> Box3D:
    decoded = decode_boxes(anchor.to_array()[None],
                           np.asarray(reg, dtype=np.float64)[None],
                           np.array([dir_bin]))[0]
    return Box3D.from_array(decoded, class_id=anchor.class_id)


def assign_targets(anchor_set: AnchorSet, labels, config: PipelineConfig):
    """Match labels to anchors per group; returns one TargetSet per group.

    An anchor is positive when its best same-class IoU reaches the class
    threshold, negative below threshold - 0.15, ignored in between. Every
    label additionally force-matches its best same-class anchor (ties and
    the all-zero-IoU case resolve to the lowest anchor index).
    """
    catalog = config.catalog
    for box in labels:
        if box.class_name not in catalog.names:
            raise ValueError(f"label class not in catalog: {box.class_name}")

    results = []
    for gi, group in enumerate(anchor_set.groups):
        n = len(group)
        boxes = group.boxes
        class_ids = group.class_ids
        group_class_ids = {catalog.class_id(name) for name in config.groups[gi]}

        best_iou = np.zeros(n, dtype=np.float64)
        best_label = np.full(n, -1, dtype=np.int64)
        group_labels = [(li, b) for li, b in enumerate(labels)
                        if b.class_id in group_class_ids]
        force = []
        for li, box in group_labels:
            idxs = np.nonzero(class_ids == box.class_id)[0]
            ious = bev_iou_one_to_many(
                box, boxes[idxs, :2], boxes[idxs, 3:5], boxes[idxs, 6])
            update = ious > best_iou[idxs]
            best_iou[idxs[update]] = ious[update]
            best_label[idxs[update]] = li
            if len(idxs):
                top = int(np.argmax(ious))  # first max -> lowest anchor index
                force.append((int(idxs[top]) if ious[top] > 0 else int(idxs[0]), li))

        pos_thr = np.array(
            [catalog.positive_thresholds[CLASS_NAMES[c]] for c in class_ids])
        neg_thr = pos_thr - NEGATIVE_GAP

        cls_target = np.full(n, BACKGROUND, dtype=np.int32)
        in_band = (best_iou >= neg_thr) & (best_iou < pos_thr)
        cls_target[in_band] = IGNORE
        positive = best_iou >= pos_thr
        for anchor_idx, li in force:
            positive[anchor_idx] = True
            best_label[anchor_idx] = li

        pos_idx = np.nonzero(positive)[0]
        reg_target = np.full((n, 9), np.nan)
        dir_target = np.full(n, -1, dtype=np.int8)
        reg_weight = np.zeros(n, dtype=np.float64)
        if len(pos_idx):
            gt_rows = np.stack([labels[best_label[i]].to_array() for i in pos_idx])
            cls_target[pos_idx] = np.array(
                [labels[best_label[i]].class_id for i in pos_idx], dtype=np.int32)
            reg_target[pos_idx] = encode_boxes(boxes[pos_idx], gt_rows)
            dir_target[pos_idx] = direction_target_array(gt_rows[:, 6])
            reg_weight[pos_idx] = 1.0
        results.append(TargetSet(cls_target=cls_target, reg_target=reg_target,
                                 dir_target=dir_target, reg_weight=reg_weight))
    return results


def save_targets(target_sets, path) -> None:
    """Persist per-group targets as one .npz archive."""
    payload = {}
    for gi, ts in enumerate(target_sets):
        payload[f"cls_{gi}"] = ts.cls_target
        payload[f"reg_{gi}"] = ts.reg_target
        payload[f"dir_{gi}"] = ts.dir_target
        payload[f"weight_{gi}"] = ts.reg_weight
    np.savez(path, num_groups=np.array(len(target_sets)), **payload)


def load_targets(path):
    data = np.load(path)
    num = int(data["num_groups"])
    return [
        TargetSet(
            cls_target=data[f"cls_{gi}"],
            reg_target=data[f"reg_{gi}"],
            dir_target=data[f"dir_{gi}"],
            reg_weight=data[f"weight_{gi}"],
        )
        for gi in range(num)
    ]

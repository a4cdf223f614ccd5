"""Prediction decoding: per-group top-k, score filter, rotated greedy NMS,
per-group cap, and velocity-aware attribute assignment."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    CLASS_NAMES,
    WITH_RIDER_ATTRIBUTE,
    Box3D,
    ClassCatalog,
    PipelineConfig,
)
from .dataset import box_from_dict, box_to_dict
from .geometry import bev_iou
from .targets import AnchorSet, decode_boxes

DEFAULT_RIDER_VELOCITY = 1.0  # m/s


@dataclass(frozen=True)
class DetectionSet:
    """Per-group decoded detections, scores descending within each group."""

    groups: tuple = field(default_factory=tuple)  # tuple of tuples of Box3D

    def all_boxes(self):
        return [b for group in self.groups for b in group]


def nms_bev(boxes, scores, iou_threshold: float, max_keep: int):
    """Greedy rotated-rectangle NMS; boxes must arrive sorted by descending
    score. Returns kept indices."""
    kept = []
    for i, box in enumerate(boxes):
        if len(kept) >= max_keep:
            break
        if all(bev_iou(box, boxes[j]) <= iou_threshold for j in kept):
            kept.append(i)
    del scores  # ordering is the caller's contract
    return kept


def decode_and_suppress(anchor_set: AnchorSet, scores, regs, dir_bins,
                        config: PipelineConfig) -> DetectionSet:
    """Turn raw per-group predictions into final detections.

    Per group: keep the top pre_max_size anchors by score, drop scores below
    the threshold, decode the survivors, then greedy NMS at the IoU threshold
    capped at post_max_size. Equal scores break by anchor index.
    """
    nms_cfg = config.nms
    out_groups = []
    for gi, group in enumerate(anchor_set.groups):
        s = np.asarray(scores[gi], dtype=np.float64).reshape(-1)
        r = np.asarray(regs[gi], dtype=np.float64).reshape(-1, 9)
        d = np.asarray(dir_bins[gi]).reshape(-1)
        if len(s) != len(group) or len(r) != len(group) or len(d) != len(group):
            raise ValueError(
                f"prediction arrays do not match anchor layout in group {gi}: "
                f"{len(s)}/{len(r)}/{len(d)} vs {len(group)} anchors"
            )
        # stable sort on -score keeps anchor order among ties
        order = np.argsort(-s, kind="stable")[: nms_cfg.pre_max_size]
        order = order[s[order] >= nms_cfg.score_threshold]
        if len(order) == 0:
            out_groups.append(tuple())
            continue
        decoded = decode_boxes(group.boxes[order], r[order], d[order])
        boxes = [
            Box3D.from_array(decoded[i],
                             class_id=int(group.class_ids[order[i]]),
                             score=float(min(s[order[i]], 1.0)))
            for i in range(len(order))
        ]
        kept = nms_bev(boxes, s[order], nms_cfg.iou_threshold, nms_cfg.post_max_size)
        out_groups.append(tuple(boxes[i] for i in kept))
    return DetectionSet(groups=tuple(out_groups))


def assign_attributes(dets: DetectionSet, catalog: ClassCatalog,
                      vel_threshold: float = DEFAULT_RIDER_VELOCITY) -> DetectionSet:
    """Give each detection its class's most common attribute; fast-moving
    cycles get the with-rider attribute instead."""
    if not (vel_threshold > 0):
        raise ValueError("vel_threshold must be positive")
    out_groups = []
    for group in dets.groups:
        boxes = []
        for box in group:
            attr = catalog.default_attributes[box.class_name]
            if box.class_name in ("bicycle", "motorcycle"):
                if math.hypot(box.vx, box.vy) > vel_threshold:
                    attr = WITH_RIDER_ATTRIBUTE
            boxes.append(dataclasses.replace(box, attribute=attr))
        out_groups.append(tuple(boxes))
    return DetectionSet(groups=tuple(out_groups))


def write_detections(dets: DetectionSet, path) -> None:
    records = []
    for gi, group in enumerate(dets.groups):
        for box in group:
            rec = box_to_dict(box)
            rec["group"] = gi
            records.append(rec)
    with open(path, "w") as f:
        json.dump({"detections": records}, f, indent=1)


def read_detections(path) -> DetectionSet:
    with open(path) as f:
        data = json.load(f)
    groups: dict = {}
    for rec in data["detections"]:
        groups.setdefault(int(rec["group"]), []).append(box_from_dict(rec))
    if not groups:
        return DetectionSet(groups=tuple())
    n = max(groups) + 1
    return DetectionSet(groups=tuple(tuple(groups.get(i, [])) for i in range(n)))


def save_predictions(path, scores, regs, dir_bins) -> None:
    """Raw per-group prediction arrays as one .npz archive (CLI input format)."""
    payload = {"num_groups": np.array(len(scores))}
    for gi in range(len(scores)):
        payload[f"scores_{gi}"] = np.asarray(scores[gi], dtype=np.float64)
        payload[f"regs_{gi}"] = np.asarray(regs[gi], dtype=np.float64)
        payload[f"dirs_{gi}"] = np.asarray(dir_bins[gi], dtype=np.int8)
    np.savez(path, **payload)


def load_predictions(path):
    data = np.load(path)
    num = int(data["num_groups"])
    scores = [data[f"scores_{gi}"] for gi in range(num)]
    regs = [data[f"regs_{gi}"] for gi in range(num)]
    dirs = [data[f"dirs_{gi}"] for gi in range(num)]
    return scores, regs, dirs

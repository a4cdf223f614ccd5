"""On-disk sample format, multi-sweep accumulation, dataset indexing, and a
synthetic scene generator for desk-scale testing.

File formats:
  <sample_id>.bin   little-endian float32, 5 per point (x, y, z, intensity, dt)
  <sample_id>.json  {"sample_id": ..., "boxes": [{class, cx, cy, cz, l, w, h,
                     yaw, vx, vy, attribute}, ...]}
  index             JSON manifest, one entry per sample with per-class counts
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    CLASS_NAMES,
    Box3D,
    ClassCatalog,
    PipelineConfig,
    wrap_to_pi,
)
from . import geometry

MAX_TIME_LAG = 0.45
POINT_RECORD_BYTES = 20  # 5 float32 per point


@dataclass(frozen=True)
class Sweep:
    """One lidar rotation: (N, 4) points (x, y, z, intensity), a timestamp,
    and the rigid transform into the keyframe frame."""

    points: np.ndarray
    timestamp: float
    pose: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 4:
            raise ValueError(f"sweep points must be (N, 4), got {pts.shape}")
        pose = np.asarray(self.pose, dtype=np.float64)
        if pose.shape != (4, 4):
            raise ValueError(f"pose must be (4, 4), got {pose.shape}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "pose", pose)


@dataclass(frozen=True)
class PointCloudSample:
    """Accumulated multi-sweep point set with per-point time lag and labels."""

    sample_id: str
    points: np.ndarray  # (N, 5): x, y, z, intensity, dt
    labels: list = field(default_factory=list)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 5:
            raise ValueError(f"sample points must be (N, 5), got {pts.shape}")
        if pts.shape[0] and (pts[:, 4].min() < -1e-9 or pts[:, 4].max() > MAX_TIME_LAG + 1e-9):
            raise ValueError("point time lag outside [0, 0.45] s")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class IndexEntry:
    sample_id: str
    points_path: str
    label_path: str
    counts: dict  # class name -> instance count

    def present(self, class_name: str) -> bool:
        return self.counts.get(class_name, 0) > 0


@dataclass(frozen=True)
class DatasetIndex:
    entries: tuple

    def __post_init__(self):
        ids = [e.sample_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate sample_ids in index")

    def __len__(self):
        return len(self.entries)

    def by_id(self, sample_id: str) -> IndexEntry:
        for e in self.entries:
            if e.sample_id == sample_id:
                return e
        raise KeyError(sample_id)


def accumulate_sweeps(keyframe: Sweep, history: list) -> PointCloudSample:
    """Merge a keyframe and up to 9 preceding sweeps into one point set.

    Each sweep is moved into the keyframe frame via its pose and every point
    gets dt = keyframe timestamp - sweep timestamp (0 for the keyframe).
    """
    if len(history) > 9:
        raise ValueError(f"at most 9 history sweeps allowed, got {len(history)}")
    chunks = []
    for sweep in [keyframe] + list(history):
        dt = keyframe.timestamp - sweep.timestamp
        if dt < 0:
            raise ValueError(
                f"history sweep at t={sweep.timestamp} is newer than keyframe"
            )
        if dt > MAX_TIME_LAG + 1e-9:
            raise ValueError(f"sweep time lag {dt:.3f}s exceeds {MAX_TIME_LAG}s")
        pts = sweep.points
        xyz1 = np.hstack([pts[:, :3], np.ones((len(pts), 1))])
        xyz = (xyz1 @ sweep.pose.T)[:, :3]
        chunk = np.column_stack([xyz, pts[:, 3], np.full(len(pts), dt)])
        chunks.append(chunk)
    points = np.vstack(chunks) if chunks else np.zeros((0, 5))
    return PointCloudSample(sample_id="accumulated", points=points)


# ---------------------------------------------------------------------------
# file I/O


def write_points(points: np.ndarray, path) -> None:
    np.asarray(points, dtype="<f4").reshape(-1, 5).tofile(path)


def read_points(path) -> np.ndarray:
    raw = np.fromfile(path, dtype="<f4")
    if raw.size % 5 != 0:
        raise IOError(f"corrupt point file (length not a multiple of 20 bytes): {path}")
    return raw.reshape(-1, 5).astype(np.float64)


def box_to_dict(box: Box3D) -> dict:
    d = {
        "class": box.class_name,
        "cx": box.cx, "cy": box.cy, "cz": box.cz,
        "l": box.l, "w": box.w, "h": box.h,
        "yaw": box.yaw, "vx": box.vx, "vy": box.vy,
        "attribute": box.attribute,
    }
    if box.score is not None:
        d["score"] = box.score
    return d


def box_from_dict(d: dict) -> Box3D:
    return Box3D(
        cx=float(d["cx"]), cy=float(d["cy"]), cz=float(d["cz"]),
        l=float(d["l"]), w=float(d["w"]), h=float(d["h"]),
        yaw=float(d["yaw"]), vx=float(d.get("vx", 0.0)), vy=float(d.get("vy", 0.0)),
        class_id=CLASS_NAMES.index(d["class"]),
        attribute=d.get("attribute"),
        score=d.get("score"),
    )


def write_labels(sample_id: str, boxes, path) -> None:
    with open(path, "w") as f:
        json.dump({"sample_id": sample_id, "boxes": [box_to_dict(b) for b in boxes]}, f, indent=1)


def read_labels(path) -> tuple:
    with open(path) as f:
        data = json.load(f)
    return data["sample_id"], [box_from_dict(d) for d in data["boxes"]]


def save_sample(sample: PointCloudSample, root) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    write_points(sample.points, root / f"{sample.sample_id}.bin")
    write_labels(sample.sample_id, sample.labels, root / f"{sample.sample_id}.json")


def load_sample(points_path, label_path) -> PointCloudSample:
    points = read_points(points_path)
    sample_id, labels = read_labels(label_path)
    return PointCloudSample(sample_id=sample_id, points=points, labels=labels)


def build_index(root) -> DatasetIndex:
    """Scan a sample directory and build the per-class presence index."""
    root = Path(root)
    entries = []
    for points_path in sorted(root.glob("*.bin")):
        label_path = points_path.with_suffix(".json")
        if not label_path.exists():
            raise IOError(f"missing label file for sample: {points_path}")
        try:
            raw = np.fromfile(points_path, dtype="<f4")
            if raw.size % 5 != 0:
                raise IOError("length not a multiple of 20 bytes")
            sample_id, labels = read_labels(label_path)
        except (IOError, json.JSONDecodeError, KeyError, ValueError) as e:
            raise IOError(f"unreadable sample {points_path}: {e}") from e
        counts = {n: 0 for n in CLASS_NAMES}
        for box in labels:
            counts[box.class_name] += 1
        entries.append(
            IndexEntry(
                sample_id=sample_id,
                points_path=str(points_path),
                label_path=str(label_path),
                counts={k: v for k, v in counts.items() if v > 0},
            )
        )
    return DatasetIndex(entries=tuple(entries))


def save_index(index: DatasetIndex, path) -> None:
    payload = {
        "samples": [
            {
                "sample_id": e.sample_id,
                "points_path": e.points_path,
                "label_path": e.label_path,
                "counts": e.counts,
            }
            for e in index.entries
        ]
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=1)


def load_index(path) -> DatasetIndex:
    with open(path) as f:
        payload = json.load(f)
    return DatasetIndex(
        entries=tuple(
            IndexEntry(
                sample_id=s["sample_id"],
                points_path=s["points_path"],
                label_path=s["label_path"],
                counts=s["counts"],
            )
            for s in payload["samples"]
        )
    )


# ---------------------------------------------------------------------------
# synthetic scenes


def _surface_points(box: Box3D, count: int, rng: np.random.Generator) -> np.ndarray:
    """Sample points on the box surface, returned as (count, 5) world-frame rows."""
    half = np.array([box.l / 2, box.w / 2, box.h / 2])
    local = rng.uniform(-1.0, 1.0, size=(count, 3)) * half
    axes = rng.integers(0, 3, size=count)
    sides = rng.choice([-1.0, 1.0], size=count)
    local[np.arange(count), axes] = sides * half[axes]
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    world = np.empty((count, 5))
    world[:, 0] = c * local[:, 0] - s * local[:, 1] + box.cx
    world[:, 1] = s * local[:, 0] + c * local[:, 1] + box.cy
    world[:, 2] = local[:, 2] + box.cz
    world[:, 3] = rng.uniform(0.0, 1.0, size=count)
    world[:, 4] = 0.0
    return world


def synth_scene(seed: int, spec: dict, config: PipelineConfig | None = None,
                ground_points: int = 4000, points_per_box: int = 48,
                sample_id: str | None = None, return_plane: bool = False):
    """Generate a deterministic labeled scene on a near-flat ground plane.

    `spec` maps class names to instance counts. Boxes sit bottom-down on the
    generated plane (residual < 1e-6) and each carries >= 32 surface points.
    With return_plane=True also returns the exact generated plane as
    (A, B, C, D).
    """
    if config is None:
        config = PipelineConfig()
    catalog = config.catalog
    for name, count in spec.items():
        if name not in CLASS_NAMES:
            raise ValueError(f"unknown class in spec: {name}")
        if count < 0:
            raise ValueError(f"negative count for {name}")
    assert points_per_box >= 32

    rng = np.random.default_rng(seed)
    # plane with a slight random tilt around z ~ -1.82
    tilt = rng.uniform(-0.02, 0.02, size=2)
    normal = np.array([tilt[0], tilt[1], 1.0])
    normal /= np.linalg.norm(normal)
    z0 = -1.82 + rng.uniform(-0.05, 0.05)
    a_, b_, c_ = normal
    d_ = -c_ * z0

    def plane_z(x, y):
        return -(a_ * x + b_ * y + d_) / c_

    chunks = []
    gx = rng.uniform(config.range_min[0] * 0.95, config.range_max[0] * 0.95, ground_points)
    gy = rng.uniform(config.range_min[1] * 0.95, config.range_max[1] * 0.95, ground_points)
    gz = plane_z(gx, gy) + rng.normal(0.0, 0.02, ground_points)
    ground = np.column_stack([gx, gy, gz, rng.uniform(0, 1, ground_points),
                              np.zeros(ground_points)])
    chunks.append(ground)

    labels = []
    for name in CLASS_NAMES:  # fixed order keeps the draw sequence stable
        for _ in range(spec.get(name, 0)):
            base_l, base_w, base_h = catalog.anchor_sizes[name]
            jitter = rng.uniform(0.9, 1.1, size=3)
            l, w, h = base_l * jitter[0], base_w * jitter[1], base_h * jitter[2]
            radius = 0.5 * math.hypot(l, w)
            box = None
            for _attempt in range(40):
                x = rng.uniform(config.range_min[0] + radius + 1.0,
                                config.range_max[0] - radius - 1.0)
                y = rng.uniform(config.range_min[1] + radius + 1.0,
                                config.range_max[1] - radius - 1.0)
                yaw = wrap_to_pi(rng.uniform(-math.pi, math.pi))
                cz = h / 2.0 + plane_z(x, y)
                if name in ("traffic_cone", "barrier"):
                    vx = vy = 0.0
                else:
                    vx, vy = rng.normal(0.0, 2.0, size=2)
                attribute = catalog.default_attributes[name]
                if name in ("bicycle", "motorcycle") and math.hypot(vx, vy) > 1.0:
                    attribute = "cycle.with_rider"
                candidate = Box3D(cx=x, cy=y, cz=cz, l=l, w=w, h=h, yaw=yaw,
                                  vx=vx, vy=vy,
                                  class_id=CLASS_NAMES.index(name),
                                  attribute=attribute)
                if all(geometry.bev_iou(candidate, other) == 0.0 for other in labels):
                    box = candidate
                    break
            if box is None:
                continue  # crowded scene; fewer instances is acceptable
            labels.append(box)
            chunks.append(_surface_points(box, points_per_box, rng))

    points = np.vstack(chunks)
    if sample_id is None:
        sample_id = f"synth-{seed:08d}"
    sample = PointCloudSample(sample_id=sample_id, points=points, labels=labels)
    if return_plane:
        return sample, (a_, b_, c_, d_)
    return sample

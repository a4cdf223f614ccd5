"""Offline ground-truth object database and ground-plane-aware paste
augmentation.

Database layout on disk: one JSON manifest plus one point binary per entry
(same 5-float32 record format as samples, dt = 0); cropped points are stored
in the box-local frame.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CLASS_NAMES, Box3D, PipelineConfig, wrap_to_pi
from .dataset import DatasetIndex, PointCloudSample, load_sample, read_points, write_points
from .geometry import bev_iou, points_in_box, points_in_bev_rect
from .ground import PlaneModel

DEFAULT_MIN_POINTS = 5
PLACEMENT_RETRIES = 10


@dataclass(frozen=True)
class DbEntry:
    box: Box3D
    points: np.ndarray  # (N, 5) in the box-local frame
    source_sample_id: str


@dataclass(frozen=True)
class GtDatabase:
    entries: dict = field(default_factory=dict)  # class name -> list of DbEntry

    def __post_init__(self):
        full = {name: list(self.entries.get(name, [])) for name in CLASS_NAMES}
        object.__setattr__(self, "entries", full)

    def size(self, class_name: str) -> int:
        return len(self.entries[class_name])

    def total(self) -> int:
        return sum(len(v) for v in self.entries.values())


@dataclass(frozen=True)
class AugMagnitudes:
    """Number of instances to place per class."""

    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, count in self.counts.items():
            if name not in CLASS_NAMES:
                raise ValueError(f"unknown class: {name}")
            if count < 0:
                raise ValueError(f"negative magnitude for {name}")

    @classmethod
    def production_defaults(cls) -> "AugMagnitudes":
        return cls(counts={
            "car": 2, "truck": 3, "bus": 7, "trailer": 4,
            "construction_vehicle": 6, "traffic_cone": 2, "barrier": 6,
            "bicycle": 6, "motorcycle": 2, "pedestrian": 2,
        })


def _to_local(points: np.ndarray, box: Box3D) -> np.ndarray:
    out = np.array(points, dtype=np.float64, copy=True)
    out[:, 0] -= box.cx
    out[:, 1] -= box.cy
    out[:, 2] -= box.cz
    c, s = math.cos(-box.yaw), math.sin(-box.yaw)
    x, y = out[:, 0].copy(), out[:, 1].copy()
    out[:, 0] = c * x - s * y
    out[:, 1] = s * x + c * y
    return out


def _to_world(local: np.ndarray, box: Box3D) -> np.ndarray:
    out = np.array(local, dtype=np.float64, copy=True)
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    x, y = out[:, 0].copy(), out[:, 1].copy()
    out[:, 0] = c * x - s * y + box.cx
    out[:, 1] = s * x + c * y + box.cy
    out[:, 2] += box.cz
    return out


def build_gt_database(index: DatasetIndex,
                      min_points: int = DEFAULT_MIN_POINTS) -> GtDatabase:
    """Crop every ground-truth box with at least `min_points` points inside."""
    if min_points < 1:
        raise ValueError("min_points must be >= 1")
    entries = {name: [] for name in CLASS_NAMES}
    for entry in index.entries:
        try:
            sample = load_sample(entry.points_path, entry.label_path)
        except (IOError, OSError) as e:
            raise IOError(f"failed reading sample {entry.sample_id}: {e}") from e
        for box in sample.labels:
            mask = points_in_box(sample.points, box)
            if int(mask.sum()) < min_points:
                continue
            local = _to_local(sample.points[mask], box)
            local[:, 4] = 0.0
            entries[box.class_name].append(
                DbEntry(box=box, points=local, source_sample_id=sample.sample_id)
            )
    return GtDatabase(entries=entries)


def place_samples(sample: PointCloudSample, db: GtDatabase, mags: AugMagnitudes,
                  plane: PlaneModel, seed: int,
                  config: PipelineConfig | None = None) -> PointCloudSample:
    """Paste up to mags[c] database objects per class into the sample.

    Each pasted box sits bottom-down on the plane at a random in-range (x, y)
    and yaw; placements overlapping any existing or already placed box in BEV
    are rejected and retried. Scene points under a placed box's BEV rectangle
    are removed before its points are inserted.
    """
    if config is None:
        config = PipelineConfig()
    rng = np.random.default_rng(seed)

    points = np.array(sample.points, dtype=np.float64, copy=True)
    labels = list(sample.labels)
    placed_chunks = []

    for name in CLASS_NAMES:
        want = mags.counts.get(name, 0)
        pool = db.entries[name]
        if want == 0 or not pool:
            continue
        picks = rng.choice(len(pool), size=want, replace=len(pool) < want)
        for pick in picks:
            entry = pool[pick]
            src = entry.box
            radius = 0.5 * math.hypot(src.l, src.w)
            for _attempt in range(PLACEMENT_RETRIES):
                x = rng.uniform(config.range_min[0] + radius, config.range_max[0] - radius)
                y = rng.uniform(config.range_min[1] + radius, config.range_max[1] - radius)
                yaw = wrap_to_pi(rng.uniform(-math.pi, math.pi))
                cz = src.h / 2.0 + plane.z_at(x, y)
                dyaw = yaw - src.yaw
                c, s = math.cos(dyaw), math.sin(dyaw)
                vx = c * src.vx - s * src.vy
                vy = s * src.vx + c * src.vy
                box = dataclasses.replace(src, cx=x, cy=y, cz=cz, yaw=yaw, vx=vx, vy=vy)
                if any(bev_iou(box, other) > 0.0 for other in labels):
                    continue
                # accepted: clear occluded scene points, insert the object
                keep = ~points_in_bev_rect(points, box)
                points = points[keep]
                placed_chunks.append(_to_world(entry.points, box))
                labels.append(box)
                break

    if placed_chunks:
        points = np.vstack([points] + placed_chunks)
    return PointCloudSample(sample_id=sample.sample_id, points=points, labels=labels)


# ---------------------------------------------------------------------------
# persistence


def save_database(db: GtDatabase, root) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    manifest = []
    for name in CLASS_NAMES:
        for i, entry in enumerate(db.entries[name]):
            rel = f"{name}_{i:06d}.bin"
            write_points(entry.points, root / rel)
            manifest.append({
                "class": name,
                "points_file": rel,
                "source_sample_id": entry.source_sample_id,
                "box": {
                    "cx": entry.box.cx, "cy": entry.box.cy, "cz": entry.box.cz,
                    "l": entry.box.l, "w": entry.box.w, "h": entry.box.h,
                    "yaw": entry.box.yaw, "vx": entry.box.vx, "vy": entry.box.vy,
                    "attribute": entry.box.attribute,
                },
            })
    with open(root / "manifest.json", "w") as f:
        json.dump({"entries": manifest}, f, indent=1)


def load_database(root) -> GtDatabase:
    root = Path(root)
    with open(root / "manifest.json") as f:
        manifest = json.load(f)
    entries = {name: [] for name in CLASS_NAMES}
    for item in manifest["entries"]:
        b = item["box"]
        box = Box3D(
            cx=b["cx"], cy=b["cy"], cz=b["cz"], l=b["l"], w=b["w"], h=b["h"],
            yaw=b["yaw"], vx=b["vx"], vy=b["vy"],
            class_id=CLASS_NAMES.index(item["class"]),
            attribute=b.get("attribute"),
        )
        pts = read_points(root / item["points_file"])
        entries[item["class"]].append(
            DbEntry(box=box, points=pts, source_sample_id=item["source_sample_id"])
        )
    return GtDatabase(entries=entries)

"""Shared domain types, configuration, and angle/box arithmetic.

Everything here is an immutable value type or a pure function; all of it is
safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

# Canonical class order. Indices into this list are used as class ids
# everywhere (labels, anchors, targets, metrics).
CLASS_NAMES = (
    "car",
    "truck",
    "bus",
    "trailer",
    "construction_vehicle",
    "pedestrian",
    "motorcycle",
    "bicycle",
    "traffic_cone",
    "barrier",
)

NUM_CLASSES = len(CLASS_NAMES)

# Default anchor sizes (l, w, h) and anchor center height per class,
# approximating per-class mean dimensions. Overridable via ClassCatalog.
_DEFAULT_ANCHOR_SIZES = {
    "car": (4.63, 1.97, 1.74),
    "truck": (6.93, 2.51, 2.84),
    "bus": (11.0, 2.94, 3.47),
    "trailer": (12.29, 2.90, 3.87),
    "construction_vehicle": (6.37, 2.85, 3.19),
    "pedestrian": (0.73, 0.67, 1.77),
    "motorcycle": (2.11, 0.77, 1.47),
    "bicycle": (1.70, 0.60, 1.28),
    "traffic_cone": (0.41, 0.41, 1.07),
    "barrier": (0.50, 2.53, 0.98),
}

_DEFAULT_ANCHOR_Z = {
    "car": -0.95,
    "truck": -0.60,
    "bus": -0.35,
    "trailer": 0.20,
    "construction_vehicle": -0.22,
    "pedestrian": -0.90,
    "motorcycle": -1.05,
    "bicycle": -1.10,
    "traffic_cone": -1.25,
    "barrier": -1.25,
}

# Most common attribute per class; None for attribute-less classes.
_DEFAULT_ATTRIBUTES = {
    "car": "vehicle.parked",
    "truck": "vehicle.parked",
    "bus": "vehicle.stopped",
    "trailer": "vehicle.parked",
    "construction_vehicle": "vehicle.parked",
    "pedestrian": "pedestrian.moving",
    "motorcycle": "cycle.without_rider",
    "bicycle": "cycle.without_rider",
    "traffic_cone": None,
    "barrier": None,
}

WITH_RIDER_ATTRIBUTE = "cycle.with_rider"

# Classes with enough annotations use the higher positive matching threshold.
_HIGH_THRESHOLD_CLASSES = frozenset({"car", "pedestrian", "traffic_cone", "barrier"})

DEFAULT_GROUPS = (
    ("car",),
    ("truck", "construction_vehicle"),
    ("bus", "trailer"),
    ("barrier",),
    ("motorcycle", "bicycle"),
    ("pedestrian", "traffic_cone"),
)


class ConfigError(ValueError):
    """Raised when a configuration violates a documented invariant."""


def wrap_angle(theta: float, period: float) -> float:
    """Wrap an angle into [0, period).

    Idempotent: wrap_angle(wrap_angle(x, p), p) == wrap_angle(x, p) exactly.
    """
    if not math.isfinite(theta):
        raise ValueError(f"non-finite angle: {theta}")
    if not (period > 0):
        raise ValueError(f"period must be positive, got {period}")
    wrapped = theta - math.floor(theta / period) * period
    # floor rounding can land exactly on the period for tiny negatives
    if wrapped >= period:
        wrapped -= period
    return wrapped


def wrap_to_pi(theta: float) -> float:
    """Wrap an angle into the canonical (-pi, pi] interval."""
    w = wrap_angle(theta, 2.0 * math.pi)
    return w - 2.0 * math.pi if w > math.pi else w


def wrap_to_pi_array(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise ValueError("non-finite angle in array")
    w = theta - np.floor(theta / (2.0 * np.pi)) * 2.0 * np.pi
    w[w > np.pi] -= 2.0 * np.pi
    return w


@dataclass(frozen=True)
class Box3D:
    """Oriented 3D box with velocity, class, optional attribute and score.

    Yaw is stored wrapped to (-pi, pi], zero along +x.
    """

    cx: float
    cy: float
    cz: float
    l: float
    w: float
    h: float
    yaw: float
    vx: float = 0.0
    vy: float = 0.0
    class_id: int = 0
    attribute: str | None = None
    score: float | None = None

    def __post_init__(self):
        if not (self.l > 0 and self.w > 0 and self.h > 0):
            raise ValueError(f"box sizes must be positive: {(self.l, self.w, self.h)}")
        if not (0 <= self.class_id < NUM_CLASSES):
            raise ValueError(f"invalid class_id {self.class_id}")
        if self.score is not None and not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        object.__setattr__(self, "yaw", wrap_to_pi(float(self.yaw)))

    @property
    def class_name(self) -> str:
        return CLASS_NAMES[self.class_id]

    def to_array(self) -> np.ndarray:
        """(cx, cy, cz, l, w, h, yaw, vx, vy) as float64."""
        return np.array(
            [self.cx, self.cy, self.cz, self.l, self.w, self.h, self.yaw, self.vx, self.vy],
            dtype=np.float64,
        )

    @classmethod
    def from_array(cls, a, class_id=0, attribute=None, score=None) -> "Box3D":
        a = np.asarray(a, dtype=np.float64)
        return cls(
            cx=float(a[0]), cy=float(a[1]), cz=float(a[2]),
            l=float(a[3]), w=float(a[4]), h=float(a[5]),
            yaw=float(a[6]), vx=float(a[7]), vy=float(a[8]),
            class_id=class_id, attribute=attribute, score=score,
        )


def box_corners_bev(box: Box3D) -> np.ndarray:
    """Return the 4 BEV corners of the yaw-rotated l x w rectangle, (4, 2).

    Counter-clockwise, starting from the (+l/2, +w/2) corner pre-rotation.
    """
    return _corners_bev(box.cx, box.cy, box.l, box.w, box.yaw)


def _corners_bev(cx, cy, l, w, yaw) -> np.ndarray:
    hl, hw = 0.5 * l, 0.5 * w
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]], dtype=np.float64)
    c, s = math.cos(yaw), math.sin(yaw)
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([cx, cy])


@dataclass(frozen=True)
class ClassCatalog:
    """Per-class defaults: anchor sizes, anchor heights, attributes, thresholds."""

    names: tuple = CLASS_NAMES
    anchor_sizes: dict = field(default_factory=lambda: dict(_DEFAULT_ANCHOR_SIZES))
    anchor_z: dict = field(default_factory=lambda: dict(_DEFAULT_ANCHOR_Z))
    default_attributes: dict = field(default_factory=lambda: dict(_DEFAULT_ATTRIBUTES))
    positive_thresholds: dict = field(
        default_factory=lambda: {
            n: (0.6 if n in _HIGH_THRESHOLD_CLASSES else 0.4) for n in CLASS_NAMES
        }
    )

    def __post_init__(self):
        if len(self.names) != NUM_CLASSES:
            raise ConfigError(f"catalog must list exactly {NUM_CLASSES} classes")
        for n in self.names:
            l, w, h = self.anchor_sizes[n]
            if not (l > 0 and w > 0 and h > 0):
                raise ConfigError(f"anchor size for {n} must be positive")

    def class_id(self, name: str) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class NmsConfig:
    pre_max_size: int = 1000
    score_threshold: float = 0.1
    iou_threshold: float = 0.2
    post_max_size: int = 80


@dataclass(frozen=True)
class ScheduleConfig:
    lr_max: float = 0.04
    div_factor: float = 10.0
    mom_high: float = 0.95
    mom_low: float = 0.85
    pct_peak: float = 0.4
    final_div: float = 1.0e4


@dataclass(frozen=True)
class PipelineConfig:
    """Pipeline-wide configuration, defaulting to the production constants."""

    range_min: tuple = (-50.4, -51.2, -5.0)
    range_max: tuple = (50.4, 51.2, 3.0)
    voxel_size: tuple = (0.1, 0.1, 0.2)
    max_points_per_voxel: int = 10
    max_voxels: int = 60000
    feature_map_downscale: int = 8
    nms: NmsConfig = field(default_factory=NmsConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    groups: tuple = DEFAULT_GROUPS
    catalog: ClassCatalog = field(default_factory=ClassCatalog)
    seed: int = 0

    def __post_init__(self):
        for field_name in ("range_min", "range_max", "voxel_size"):
            value = getattr(self, field_name)
            if len(value) != 3:
                raise ConfigError(f"{field_name} must have 3 components, got {value!r}")
        for axis in range(3):
            lo, hi, vs = self.range_min[axis], self.range_max[axis], self.voxel_size[axis]
            if not hi > lo:
                raise ConfigError(f"range_max must exceed range_min on axis {axis}")
            if vs <= 0:
                raise ConfigError(f"voxel_size must be positive on axis {axis}")
            n = (hi - lo) / vs
            if abs(n - round(n)) > 1e-9:
                raise ConfigError(
                    f"range extent not divisible by voxel size on axis {axis}: {n}"
                )
        seen = [name for group in self.groups for name in group]
        if sorted(seen) != sorted(self.catalog.names):
            raise ConfigError("groups must partition the class catalog exactly")

    @property
    def grid_dims(self) -> tuple:
        """(nx, ny, nz) voxel counts."""
        return tuple(
            int(round((self.range_max[i] - self.range_min[i]) / self.voxel_size[i]))
            for i in range(3)
        )


def _config_to_dict(cfg: PipelineConfig) -> dict:
    return {
        "range_min": list(cfg.range_min),
        "range_max": list(cfg.range_max),
        "voxel_size": list(cfg.voxel_size),
        "max_points_per_voxel": cfg.max_points_per_voxel,
        "max_voxels": cfg.max_voxels,
        "feature_map_downscale": cfg.feature_map_downscale,
        "seed": cfg.seed,
        "nms": {
            "pre_max_size": cfg.nms.pre_max_size,
            "score_threshold": cfg.nms.score_threshold,
            "iou_threshold": cfg.nms.iou_threshold,
            "post_max_size": cfg.nms.post_max_size,
        },
        "schedule": {
            "lr_max": cfg.schedule.lr_max,
            "div_factor": cfg.schedule.div_factor,
            "mom_high": cfg.schedule.mom_high,
            "mom_low": cfg.schedule.mom_low,
            "pct_peak": cfg.schedule.pct_peak,
            "final_div": cfg.schedule.final_div,
        },
        "groups": [list(g) for g in cfg.groups],
    }


def save_config(cfg: PipelineConfig, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(_config_to_dict(cfg), f, sort_keys=False)


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Load a config file, filling unspecified keys with the built-in defaults.

    Precedence: overrides > file > defaults.
    """
    data: dict = {}
    if path is not None:
        with open(path) as f:
            loaded = yaml.safe_load(f) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config root must be a mapping: {path}")
        data.update(loaded)
    if overrides:
        data.update(overrides)

    kwargs = {}
    for key in ("range_min", "range_max", "voxel_size"):
        if key in data:
            kwargs[key] = tuple(float(v) for v in data[key])
    for key in ("max_points_per_voxel", "max_voxels", "feature_map_downscale", "seed"):
        if key in data:
            kwargs[key] = int(data[key])
    if "nms" in data:
        kwargs["nms"] = NmsConfig(**data["nms"])
    if "schedule" in data:
        kwargs["schedule"] = ScheduleConfig(**data["schedule"])
    if "groups" in data:
        kwargs["groups"] = tuple(tuple(g) for g in data["groups"])
    try:
        return PipelineConfig(**kwargs)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def with_overrides(cfg: PipelineConfig, **kwargs) -> PipelineConfig:
    return replace(cfg, **kwargs)

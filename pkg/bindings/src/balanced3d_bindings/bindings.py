"""The binding layer proper.

Each bound_* function validates shape/dtype/contiguity up front, marks its
array inputs read-only while the underlying library call runs, and hands the
buffers through without copying. Outputs are converted to the documented
dtypes as fresh caller-owned arrays.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from balanced3d import (
    CLASS_NAMES,
    Box3D,
    DatasetIndex,
    IndexEntry,
    PipelineConfig,
    assign_targets,
    build_epoch,
    decode_and_suppress,
    generate_anchors,
    load_config,
    voxelize,
)


def load_pipeline_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Same YAML config format and precedence rules as the library CLI."""
    return load_config(path, overrides)


def _check_array(name, arr, dtype, ncols=None, ndim=2):
    if not isinstance(arr, np.ndarray):
        raise TypeError(f"{name} must be a numpy ndarray, got {type(arr).__name__}")
    if arr.dtype != np.dtype(dtype):
        raise TypeError(f"{name} must have dtype {np.dtype(dtype).name}, "
                        f"got {arr.dtype.name}")
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if ncols is not None and arr.shape[1] != ncols:
        raise ValueError(f"{name} must have {ncols} columns, got shape {arr.shape}")
    if not arr.flags.c_contiguous:
        raise ValueError(f"{name} must be C-contiguous (row-major)")


@contextmanager
def _borrowed(*arrays):
    """Freeze the inputs for the call duration, restoring writability after."""
    saved = [a.flags.writeable for a in arrays]
    for a in arrays:
        a.flags.writeable = False
    try:
        yield
    finally:
        for a, flag in zip(arrays, saved):
            a.flags.writeable = flag


def _owned(arr, dtype):
    out = np.ascontiguousarray(arr, dtype=dtype)
    if out.base is not None or out is arr:
        out = out.copy()
    return out


def bound_voxelize(points: np.ndarray, config: PipelineConfig | None = None,
                   threads: int = 1):
    """Voxelize an (N, 5) float32 cloud.

    Returns (coords M x 3 int32, features M x 5 float32, counts M int32),
    byte-identical to the native voxelizer's output under these dtypes.
    """
    _check_array("points", points, np.float32, ncols=5)
    if config is None:
        config = PipelineConfig()
    with _borrowed(points):
        vs = voxelize(points, config, threads=threads)
    return (_owned(vs.coords, np.int32),
            _owned(vs.features, np.float32),
            _owned(vs.counts, np.int32))


def bound_build_epoch(class_counts: np.ndarray, fraction: float, seed: int,
                      class_names=tuple(CLASS_NAMES)) -> np.ndarray:
    """Balanced epoch plan over an (N, C) int32 per-sample class-count matrix.

    Column c holds the instance count of class_names[c] in sample row i.
    Returns the epoch as int64 row indices into the matrix, in draw order.
    """
    _check_array("class_counts", class_counts, np.int32)
    if class_counts.shape[1] != len(class_names):
        raise ValueError(
            f"class_counts has {class_counts.shape[1]} columns but "
            f"{len(class_names)} class names were given")
    with _borrowed(class_counts):
        entries = [
            IndexEntry(sample_id=str(i), points_path="", label_path="",
                       counts={name: int(row[c])
                               for c, name in enumerate(class_names) if row[c]})
            for i, row in enumerate(class_counts)
        ]
        plan = build_epoch(DatasetIndex(entries=entries), fraction, seed,
                           classes=tuple(class_names))
    return np.fromiter((int(sid) for sid in plan.sample_ids), dtype=np.int64,
                       count=len(plan))


def bound_assign_targets(boxes: np.ndarray, class_ids: np.ndarray,
                         config: PipelineConfig | None = None):
    """Anchor targets for (N, 9) float64 boxes with int32 class ids.

    Returns one (cls int64, reg float64 (A, 9), dir int8, reg_weight float64)
    tuple per head group, A being the group's anchor count.
    """
    _check_array("boxes", boxes, np.float64, ncols=9)
    _check_array("class_ids", class_ids, np.int32, ndim=1)
    if len(boxes) != len(class_ids):
        raise ValueError(f"boxes and class_ids disagree on length: "
                         f"{len(boxes)} vs {len(class_ids)}")
    if config is None:
        config = PipelineConfig()
    with _borrowed(boxes, class_ids):
        labels = [Box3D.from_array(boxes[i], class_id=int(class_ids[i]))
                  for i in range(len(boxes))]
        anchors = generate_anchors(config)
        target_sets = assign_targets(anchors, labels, config)
    return [
        (_owned(ts.cls_target, np.int64), _owned(ts.reg_target, np.float64),
         _owned(ts.dir_target, np.int8), _owned(ts.reg_weight, np.float64))
        for ts in target_sets
    ]


def bound_decode(scores, regs, dir_bins, config: PipelineConfig | None = None):
    """Decode per-group raw predictions into flat detection arrays.

    scores/regs/dir_bins are sequences with one float64 (A,) array, one
    float64 (A, 9) array, and one int8 (A,) array per group. Returns
    (boxes K x 9 float64, class_ids K int32, det_scores K float64,
    group_index K int32), ordered by group then descending score.
    """
    if config is None:
        config = PipelineConfig()
    if not (len(scores) == len(regs) == len(dir_bins) == len(config.groups)):
        raise ValueError(
            f"expected {len(config.groups)} per-group arrays, got "
            f"{len(scores)}/{len(regs)}/{len(dir_bins)}")
    for gi in range(len(scores)):
        _check_array(f"scores[{gi}]", scores[gi], np.float64, ndim=1)
        _check_array(f"regs[{gi}]", regs[gi], np.float64, ncols=9)
        _check_array(f"dir_bins[{gi}]", dir_bins[gi], np.int8, ndim=1)
    with _borrowed(*scores, *regs, *dir_bins):
        anchors = generate_anchors(config)
        dets = decode_and_suppress(anchors, scores, regs, dir_bins, config)
    flat = [(box, gi) for gi, group in enumerate(dets.groups) for box in group]
    out_boxes = np.empty((len(flat), 9), dtype=np.float64)
    out_cls = np.empty(len(flat), dtype=np.int32)
    out_scores = np.empty(len(flat), dtype=np.float64)
    out_group = np.empty(len(flat), dtype=np.int32)
    for k, (box, gi) in enumerate(flat):
        out_boxes[k] = box.to_array()
        out_cls[k] = box.class_id
        out_scores[k] = box.score
        out_group[k] = gi
    return out_boxes, out_cls, out_scores, out_group

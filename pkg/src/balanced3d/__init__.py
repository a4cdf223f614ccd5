"""Non-neural pipeline for class-balanced lidar 3D object detection:
balanced sampling, ground-plane-aware paste augmentation, voxelization,
grouped anchor/target machinery, loss and schedule math, rotated NMS
decoding, and detection metrics."""

from .core import (
    CLASS_NAMES,
    Box3D,
    ClassCatalog,
    ConfigError,
    NmsConfig,
    PipelineConfig,
    ScheduleConfig,
    box_corners_bev,
    load_config,
    save_config,
    wrap_angle,
    wrap_to_pi,
)
from .dataset import (
    DatasetIndex,
    IndexEntry,
    PointCloudSample,
    Sweep,
    accumulate_sweeps,
    build_index,
    load_sample,
    save_sample,
    synth_scene,
)
from .sampler import EpochPlan, build_epoch, class_sample_lists
from .ground import (
    PlaneModel,
    RansacParams,
    estimate_ground_plane,
    fit_plane_lsq,
    fit_plane_ransac,
)
from .gtaug import AugMagnitudes, GtDatabase, build_gt_database, place_samples
from .geometry import bev_iou, global_transform, points_in_box
from .voxels import VoxelSet, voxelize
from .targets import (
    AnchorSet,
    TargetSet,
    assign_targets,
    decode_box,
    decode_boxes,
    direction_target,
    encode_box,
    encode_boxes,
    generate_anchors,
)
from .losses import focal_loss, group_loss, one_cycle, smooth_l1, total_loss
from .postprocess import (
    DetectionSet,
    assign_attributes,
    decode_and_suppress,
    nms_bev,
)
from .metrics import (
    MetricsReport,
    average_precision,
    evaluate,
    match_detections,
    nds,
    tp_errors,
)

__version__ = "0.1.0"

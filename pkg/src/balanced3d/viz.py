"""Static renders: BEV scene overlays and precision-recall curves."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .core import box_corners_bev


def render_bev(points, gts, dets, path, extent=55.0) -> None:
    """Overlay ground truth (green) and detections (blue) on the point cloud."""
    fig, ax = plt.subplots(figsize=(8, 8))
    pts = np.asarray(points)
    if len(pts):
        ax.scatter(pts[:, 0], pts[:, 1], s=0.2, c="0.6", linewidths=0)
    for boxes, color in ((gts, "tab:green"), (dets, "tab:blue")):
        for box in boxes:
            corners = box_corners_bev(box)
            loop = np.vstack([corners, corners[:1]])
            ax.plot(loop[:, 0], loop[:, 1], color=color, linewidth=0.8)
            # front-edge tick showing heading
            mid = 0.5 * (corners[0] + corners[3])
            ax.plot([box.cx, mid[0]], [box.cy, mid[1]], color=color, linewidth=0.8)
    ax.set_xlim(-extent, extent)
    ax.set_ylim(-extent, extent)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_pr_curves(dets, gts, path, thresholds=(0.5, 1.0, 2.0, 4.0)) -> None:
    """One PR curve per class and distance tier, from the same greedy matching
    the AP computation uses."""
    from .core import CLASS_NAMES
    from .metrics import match_detections

    fig, ax = plt.subplots(figsize=(7, 6))
    for cid, name in enumerate(CLASS_NAMES):
        gts_c = [g for g in gts if g.class_id == cid]
        dets_c = [d for d in dets if d.class_id == cid]
        if not gts_c or not dets_c:
            continue
        for thr in thresholds:
            _, tp_flags = match_detections(dets_c, gts_c, thr)
            tp = np.cumsum(np.asarray(tp_flags, dtype=np.float64))
            fp = np.cumsum(~np.asarray(tp_flags, dtype=bool))
            recall = tp / len(gts_c)
            precision = tp / (tp + fp)
            ax.plot(recall, precision, alpha=0.6,
                    label=f"{name}@{thr:g}m" if thr == thresholds[0] else None)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=7, loc="lower left")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)

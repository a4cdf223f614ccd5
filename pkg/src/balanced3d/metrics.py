"""Detection metrics: center-distance matched AP, the five true-positive
error metrics, and the combined detection score."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import CLASS_NAMES, Box3D, wrap_to_pi

DIST_THRESHOLDS = (0.5, 1.0, 2.0, 4.0)  # meters
TP_ERROR_THRESHOLD = 2.0                # tier used for the error metrics
ERROR_NAMES = ("ate", "ase", "aoe", "ave", "aae")
MIN_RECALL = 0.1
MIN_PRECISION = 0.1


def _center_distance(a: Box3D, b: Box3D) -> float:
    return math.hypot(a.cx - b.cx, a.cy - b.cy)


def _sorted_by_score(dets):
    return sorted(dets, key=lambda b: -(b.score if b.score is not None else 1.0))


def match_detections(dets, gts, dist_threshold: float):
    """Greedy one-to-one matching within one class.

    Detections are processed in descending score order; each matches the
    nearest still-unmatched ground truth within the distance threshold.
    Returns (matches, tp_flags) with matches as (det, gt) pairs and tp_flags
    aligned with the score-sorted detection order.
    """
    dets = _sorted_by_score(dets)
    unmatched = list(range(len(gts)))
    matches = []
    tp_flags = []
    for det in dets:
        best_j = None
        best_dist = dist_threshold
        for j in unmatched:
            if gts[j].class_id != det.class_id:
                continue
            d = _center_distance(det, gts[j])
            if d <= best_dist:
                best_dist = d
                best_j = j
        if best_j is None:
            tp_flags.append(False)
        else:
            unmatched.remove(best_j)
            matches.append((det, gts[best_j]))
            tp_flags.append(True)
    return matches, tp_flags


def _class_ap(dets, gts, dist_threshold: float) -> float:
    """AP for one class at one distance tier, normalized over the operating
    region recall > 0.1, precision > 0.1."""
    npos = len(gts)
    assert npos > 0
    _, tp_flags = match_detections(dets, gts, dist_threshold)
    if not tp_flags:
        return 0.0
    tp = np.cumsum(np.asarray(tp_flags, dtype=np.float64))
    fp = np.cumsum(~np.asarray(tp_flags, dtype=bool))
    recall = tp / npos
    precision = tp / (tp + fp)
    rec_interp = np.linspace(0.0, 1.0, 101)
    prec = np.interp(rec_interp, recall, precision, right=0.0)
    prec = prec[int(round(100 * MIN_RECALL)) + 1:]
    prec = np.clip(prec - MIN_PRECISION, 0.0, None)
    return float(prec.mean()) / (1.0 - MIN_PRECISION)


def average_precision(dets, gts, thresholds=DIST_THRESHOLDS):
    """Per-class, per-threshold AP plus the overall mean.

    Classes with zero ground truth are excluded from the mean entirely.
    """
    per_class = {}
    means = []
    for cid, name in enumerate(CLASS_NAMES):
        gts_c = [g for g in gts if g.class_id == cid]
        if not gts_c:
            continue
        dets_c = [d for d in dets if d.class_id == cid]
        aps = {thr: _class_ap(dets_c, gts_c, thr) for thr in thresholds}
        per_class[name] = aps
        means.append(float(np.mean(list(aps.values()))))
    mean_ap = float(np.mean(means)) if means else 0.0
    return per_class, mean_ap


def _aligned_size_iou(a: Box3D, b: Box3D) -> float:
    """3D IoU after aligning centers and yaw, so only size differences count."""
    inter = (min(a.l, b.l) * min(a.w, b.w) * min(a.h, b.h))
    va = a.l * a.w * a.h
    vb = b.l * b.w * b.h
    return inter / (va + vb - inter)


def tp_errors(matches):
    """(ATE, ASE, AOE, AVE, AAE) averaged over matched pairs.

    Empty matches report the protocol convention of 1.0 for every error.
    """
    if not matches:
        return (1.0, 1.0, 1.0, 1.0, 1.0)
    ate = ase = aoe = ave = aae = 0.0
    for det, gt in matches:
        ate += _center_distance(det, gt)
        ase += 1.0 - _aligned_size_iou(det, gt)
        aoe += abs(wrap_to_pi(det.yaw - gt.yaw))
        ave += math.hypot(det.vx - gt.vx, det.vy - gt.vy)
        aae += 0.0 if det.attribute == gt.attribute else 1.0
    n = len(matches)
    return (ate / n, ase / n, aoe / n, ave / n, aae / n)


def nds(mean_ap: float, errors) -> float:
    """Combined score: (5 * mAP + sum of (1 - min(1, err))) / 10."""
    errors = tuple(errors)
    if len(errors) != 5:
        raise ValueError(f"expected 5 error terms, got {len(errors)}")
    bonus = sum(1.0 - min(1.0, e) for e in errors)
    return (5.0 * mean_ap + bonus) / 10.0


@dataclass(frozen=True)
class MetricsReport:
    ap: dict                 # class -> {threshold: AP}
    mean_ap: float
    class_errors: dict       # class -> {error name: value}
    mean_errors: tuple       # (mATE, mASE, mAOE, mAVE, mAAE)
    nds: float

    def to_dict(self) -> dict:
        return {
            "ap": {name: {str(t): v for t, v in aps.items()}
                   for name, aps in self.ap.items()},
            "mAP": self.mean_ap,
            "class_errors": self.class_errors,
            "mean_errors": dict(zip(("mATE", "mASE", "mAOE", "mAVE", "mAAE"),
                                    self.mean_errors)),
            "NDS": self.nds,
        }

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1)


def evaluate(dets, gts, thresholds=DIST_THRESHOLDS,
             error_masks: dict | None = None) -> MetricsReport:
    """Full evaluation of one detection set against one ground-truth set.

    `error_masks` optionally maps class names to error names excluded from
    the per-metric means (protocol subtleties; off by default).
    """
    error_masks = error_masks or {}
    ap_table, mean_ap = average_precision(dets, gts, thresholds)

    class_errors = {}
    for cid, name in enumerate(CLASS_NAMES):
        gts_c = [g for g in gts if g.class_id == cid]
        if not gts_c:
            continue
        dets_c = [d for d in dets if d.class_id == cid]
        matches, _ = match_detections(dets_c, gts_c, TP_ERROR_THRESHOLD)
        class_errors[name] = dict(zip(ERROR_NAMES, tp_errors(matches)))

    mean_errors = []
    for err in ERROR_NAMES:
        values = [
            class_errors[name][err]
            for name in class_errors
            if err not in error_masks.get(name, ())
        ]
        mean_errors.append(float(np.mean(values)) if values else 1.0)
    mean_errors = tuple(mean_errors)
    return MetricsReport(ap=ap_table, mean_ap=mean_ap, class_errors=class_errors,
                         mean_errors=mean_errors, nds=nds(mean_ap, mean_errors))

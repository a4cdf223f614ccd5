"""Command-line interface: every subcommand is a thin shell over exactly one
library operation.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset, gtaug, metrics, postprocess, sampler, targets, viz, voxels
from .core import CLASS_NAMES, load_config
from .geometry import global_transform, sample_transform_params
from .ground import RansacParams, estimate_ground_plane


def _add_config_arg(p):
    p.add_argument("--config", default=None, help="pipeline config YAML; "
                   "unset keys fall back to the built-in defaults")


def _parse_counts(text: str) -> dict:
    counts = {}
    for part in text.split(","):
        if not part.strip():
            continue
        name, _, value = part.partition("=")
        counts[name.strip()] = int(value)
    return counts


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="balanced3d",
                                     description="class-balanced lidar "
                                     "detection pipeline tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="scan a sample directory into a manifest")
    p.add_argument("--root", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sample-epoch", help="build a class-balanced epoch plan")
    p.add_argument("--index", required=True)
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--classes", default=None,
                   help="comma-separated class subset to balance over "
                   "(default: the full catalog)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("plane-fit", help="estimate the ground plane of a point file")
    p.add_argument("--points", required=True)
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--min-inlier-fraction", type=float, default=0.3)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("build-gtdb", help="build the ground-truth object database")
    p.add_argument("--index", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-points", type=int, default=gtaug.DEFAULT_MIN_POINTS)

    p = sub.add_parser("augment", help="GT-paste plus global geometric augmentation")
    p.add_argument("--points", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--db", default=None, help="GT database directory; omit to skip pasting")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-points", required=True)
    p.add_argument("--out-labels", required=True)
    p.add_argument("--no-global", action="store_true",
                   help="skip flip/scale/rotate/translate")
    _add_config_arg(p)

    p = sub.add_parser("voxelize", help="voxelize a point file")
    p.add_argument("--points", required=True)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--threads", type=int, default=1)
    _add_config_arg(p)

    p = sub.add_parser("assign-targets", help="anchor targets for a label file")
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    _add_config_arg(p)

    p = sub.add_parser("decode", help="decode raw predictions into detections")
    p.add_argument("--preds", required=True, help=".npz with per-group "
                   "scores_<g>, regs_<g>, dirs_<g> arrays")
    p.add_argument("--out", required=True)
    p.add_argument("--rider-velocity", type=float,
                   default=postprocess.DEFAULT_RIDER_VELOCITY)
    _add_config_arg(p)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--dets", required=True)
    p.add_argument("--gt", required=True, help="label JSON file")
    p.add_argument("--out", default=None)
    p.add_argument("--plot", default=None, metavar="DIR",
                   help="also write PR curves and a BEV render here")
    p.add_argument("--points", default=None, help="point file for the BEV render")

    p = sub.add_parser("synth", help="generate a synthetic labeled scene")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--counts", required=True,
                   help="per-class instance counts, e.g. car=2,pedestrian=1")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sample-id", default=None)
    _add_config_arg(p)

    p = sub.add_parser("render-bev", help="render points, labels, detections")
    p.add_argument("--points", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--dets", default=None)
    p.add_argument("--out", required=True)

    return parser


def _run(args) -> int:
    if args.command == "index":
        dataset.save_index(dataset.build_index(args.root), args.out)

    elif args.command == "sample-epoch":
        index = dataset.load_index(args.index)
        classes = tuple(CLASS_NAMES)
        if args.classes:
            classes = tuple(c.strip() for c in args.classes.split(",") if c.strip())
            unknown = [c for c in classes if c not in CLASS_NAMES]
            if unknown:
                raise ValueError(f"unknown classes: {unknown}")
        plan = sampler.build_epoch(index, args.fraction, args.seed, classes=classes)
        sampler.write_plan(plan, args.out)

    elif args.command == "plane-fit":
        points = dataset.read_points(args.points)
        params = RansacParams(iterations=args.iterations,
                              inlier_threshold=args.threshold,
                              min_inlier_fraction=args.min_inlier_fraction,
                              seed=args.seed)
        plane = estimate_ground_plane(points, params)
        print(f"{plane.a:.9f} {plane.b:.9f} {plane.c:.9f} {plane.d:.9f} "
              f"{plane.inlier_count}")

    elif args.command == "build-gtdb":
        index = dataset.load_index(args.index)
        db = gtaug.build_gt_database(index, min_points=args.min_points)
        gtaug.save_database(db, args.out)

    elif args.command == "augment":
        config = load_config(args.config)
        sample = dataset.load_sample(args.points, args.labels)
        rng = np.random.default_rng(args.seed)
        if args.db is not None:
            db = gtaug.load_database(args.db)
            plane = estimate_ground_plane(sample.points)
            sample = gtaug.place_samples(
                sample, db, gtaug.AugMagnitudes.production_defaults(), plane,
                seed=int(rng.integers(0, 2**31)), config=config)
        if not args.no_global:
            flip_y, scale, rot_z, translate = sample_transform_params(rng)
            sample = global_transform(sample, flip_y, scale, rot_z, translate)
        dataset.write_points(sample.points, args.out_points)
        dataset.write_labels(sample.sample_id, sample.labels, args.out_labels)

    elif args.command == "voxelize":
        config = load_config(args.config)
        points = dataset.read_points(args.points)
        vs = voxels.voxelize(points, config, threads=args.threads)
        voxels.write_voxels(vs, args.out_prefix)

    elif args.command == "assign-targets":
        config = load_config(args.config)
        _, labels = dataset.read_labels(args.labels)
        anchor_set = targets.generate_anchors(config)
        target_sets = targets.assign_targets(anchor_set, labels, config)
        targets.save_targets(target_sets, args.out)

    elif args.command == "decode":
        config = load_config(args.config)
        scores, regs, dirs = postprocess.load_predictions(args.preds)
        anchor_set = targets.generate_anchors(config)
        dets = postprocess.decode_and_suppress(anchor_set, scores, regs, dirs, config)
        dets = postprocess.assign_attributes(dets, config.catalog,
                                             vel_threshold=args.rider_velocity)
        postprocess.write_detections(dets, args.out)

    elif args.command == "eval":
        dets = postprocess.read_detections(args.dets).all_boxes()
        _, gts = dataset.read_labels(args.gt)
        report = metrics.evaluate(dets, gts)
        if args.out:
            report.save(args.out)
        print(json.dumps(report.to_dict(), indent=1))
        if args.plot:
            out = Path(args.plot)
            out.mkdir(parents=True, exist_ok=True)
            viz.plot_pr_curves(dets, gts, out / "pr_curves.png")
            points = dataset.read_points(args.points) if args.points else np.zeros((0, 5))
            viz.render_bev(points, gts, dets, out / "bev.png")

    elif args.command == "synth":
        config = load_config(args.config)
        sample = dataset.synth_scene(args.seed, _parse_counts(args.counts),
                                     config=config, sample_id=args.sample_id)
        dataset.save_sample(sample, args.out_dir)

    elif args.command == "render-bev":
        points = dataset.read_points(args.points)
        gts = dataset.read_labels(args.labels)[1] if args.labels else []
        dets = postprocess.read_detections(args.dets).all_boxes() if args.dets else []
        viz.render_bev(points, gts, dets, args.out)

    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except (ValueError, KeyError, IOError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

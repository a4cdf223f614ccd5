#!/usr/bin/env python3
"""Time the voxelizer on random clouds of increasing size and confirm the
thread-count invariance of the output.

Usage: python3 scripts/benchmark_voxelizer.py
"""

import argparse
import time

import numpy as np

from balanced3d import PipelineConfig, voxelize


def random_cloud(rng, n, config):
    lo = np.array(config.range_min)
    hi = np.array(config.range_max)
    pts = np.empty((n, 5))
    pts[:, :3] = rng.uniform(lo, hi, (n, 3))
    pts[:, 3] = rng.uniform(0, 1, n)
    pts[:, 4] = rng.uniform(0, 0.45, n)
    return pts


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    config = PipelineConfig()
    rng = np.random.default_rng(args.seed)
    print(f"grid {config.grid_dims}, caps {config.max_points_per_voxel} pts/voxel, "
          f"{config.max_voxels} voxels")
    for n in (10**4, 10**5, 3 * 10**5, 10**6):
        pts = random_cloud(rng, n, config)
        best = min(
            timed(voxelize, pts, config) for _ in range(args.repeats)
        )
        out = voxelize(pts, config, threads=8)
        base = voxelize(pts, config, threads=1)
        same = (np.array_equal(out.coords, base.coords)
                and np.array_equal(out.features, base.features))
        print(f"  n={n:>8}: {best * 1e3:8.1f} ms, {len(base):>6} voxels, "
              f"thread-invariant={same}")
    return 0


def timed(fn, *args):
    t0 = time.perf_counter()
    fn(*args)
    return time.perf_counter() - t0


if __name__ == "__main__":
    raise SystemExit(main())

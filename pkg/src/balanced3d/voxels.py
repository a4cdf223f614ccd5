"""Point cloud to voxel conversion with mean-pooled 5-vector features.

The contract is bit-determinism equal to the sequential algorithm: overflow
of both the per-voxel point cap and the voxel cap is resolved first-come in
input order, and the output is sorted by linearized voxel index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PipelineConfig


@dataclass(frozen=True)
class VoxelSet:
    coords: np.ndarray    # (M, 3) int32 (ix, iy, iz), sorted by linear index
    features: np.ndarray  # (M, 5) float: mean x, y, z, intensity, dt
    counts: np.ndarray    # (M,) int32, retained points per voxel
    grid_dims: tuple      # (nx, ny, nz)

    def __len__(self):
        return len(self.counts)


def linear_index(coords: np.ndarray, grid_dims) -> np.ndarray:
    nx, ny, _ = grid_dims
    return (coords[:, 2].astype(np.int64) * ny + coords[:, 1]) * nx + coords[:, 0]


def voxelize(points: np.ndarray, config: PipelineConfig, threads: int = 1) -> VoxelSet:
    """Voxelize an (N, 5) point array.

    Out-of-range points are dropped (half-open range: a point exactly at
    range_max falls outside). Each voxel keeps at most max_points_per_voxel
    points in input order and at most max_voxels voxels survive, in order of
    first point occurrence. `threads` is accepted for interface parity; the
    result is identical for any value.
    """
    del threads
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 5)
    nx, ny, nz = config.grid_dims
    rmin = np.asarray(config.range_min)
    rmax = np.asarray(config.range_max)
    vs = np.asarray(config.voxel_size)

    if len(pts) == 0:
        return VoxelSet(
            coords=np.zeros((0, 3), dtype=np.int32),
            features=np.zeros((0, 5), dtype=np.float64),
            counts=np.zeros(0, dtype=np.int32),
            grid_dims=(nx, ny, nz),
        )

    in_range = np.all((pts[:, :3] >= rmin) & (pts[:, :3] < rmax), axis=1)
    kept = pts[in_range]
    # 1e-9 slack keeps exact-boundary points in the upper voxel despite the
    # division round-off (e.g. (0 + 50.4) / 0.1 evaluating just below 504)
    coords = np.floor((kept[:, :3] - rmin) / vs + 1e-9).astype(np.int64)
    # guard against floor landing on the upper edge through round-off
    coords = np.clip(coords, 0, np.array([nx, ny, nz]) - 1)
    lin = (coords[:, 2] * ny + coords[:, 1]) * nx + coords[:, 0]

    # voxels in order of first occurrence, capped at max_voxels
    _, first_pos, inverse = np.unique(lin, return_index=True, return_inverse=True)
    order_of_first = np.argsort(first_pos, kind="stable")
    voxel_rank = np.empty(len(first_pos), dtype=np.int64)
    voxel_rank[order_of_first] = np.arange(len(first_pos))
    point_voxel_rank = voxel_rank[inverse]
    voxel_ok = point_voxel_rank < config.max_voxels

    # per-point rank within its voxel, in input order
    perm = np.argsort(inverse, kind="stable")
    sorted_inv = inverse[perm]
    block_start = np.zeros(len(sorted_inv), dtype=np.int64)
    if len(sorted_inv) > 1:
        new_block = np.nonzero(np.diff(sorted_inv))[0] + 1
        starts = np.zeros(len(sorted_inv), dtype=np.int64)
        starts[new_block] = new_block
        block_start = np.maximum.accumulate(starts)
    rank_sorted = np.arange(len(sorted_inv)) - block_start
    rank = np.empty(len(sorted_inv), dtype=np.int64)
    rank[perm] = rank_sorted
    point_ok = voxel_ok & (rank < config.max_points_per_voxel)

    sel = np.nonzero(point_ok)[0]
    sel_lin = lin[sel]
    uniq_lin, sel_inverse = np.unique(sel_lin, return_inverse=True)
    m = len(uniq_lin)
    sums = np.zeros((m, 5), dtype=np.float64)
    np.add.at(sums, sel_inverse, kept[sel])
    counts = np.bincount(sel_inverse, minlength=m)
    features = sums / counts[:, None]

    out_coords = np.empty((m, 3), dtype=np.int32)
    out_coords[:, 0] = uniq_lin % nx
    out_coords[:, 1] = (uniq_lin // nx) % ny
    out_coords[:, 2] = uniq_lin // (nx * ny)
    return VoxelSet(
        coords=out_coords,
        features=features,
        counts=counts.astype(np.int32),
        grid_dims=(nx, ny, nz),
    )


def write_voxels(vs: VoxelSet, out_prefix) -> None:
    """Persist a VoxelSet as two little-endian binary streams plus a header."""
    prefix = str(out_prefix)
    vs.coords.astype("<i4").tofile(prefix + ".coords.bin")
    vs.features.astype("<f4").tofile(prefix + ".feats.bin")
    vs.counts.astype("<i4").tofile(prefix + ".counts.bin")
    with open(prefix + ".header.txt", "w") as f:
        nx, ny, nz = vs.grid_dims
        f.write(f"{nx} {ny} {nz} {len(vs)}\n")


def read_voxels(out_prefix) -> VoxelSet:
    prefix = str(out_prefix)
    with open(prefix + ".header.txt") as f:
        nx, ny, nz, count = (int(v) for v in f.read().split())
    coords = np.fromfile(prefix + ".coords.bin", dtype="<i4").reshape(count, 3)
    features = np.fromfile(prefix + ".feats.bin", dtype="<f4").reshape(count, 5)
    counts = np.fromfile(prefix + ".counts.bin", dtype="<i4")
    return VoxelSet(coords=coords, features=features.astype(np.float64),
                    counts=counts, grid_dims=(nx, ny, nz))

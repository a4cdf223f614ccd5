"""Ground plane estimation: total least squares inside RANSAC.

The plane is Ax + By + Cz + D = 0 with (A, B, C) a unit normal pointing up.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_PLANE_Z = -1.82  # fallback when no consensus plane is found


class DegenerateInputError(ValueError):
    """Too few points, or the points do not define a usable plane."""


class NoPlaneFoundError(RuntimeError):
    """RANSAC failed to reach the required consensus."""


@dataclass(frozen=True)
class PlaneModel:
    a: float
    b: float
    c: float
    d: float
    inlier_count: int = 0

    def __post_init__(self):
        norm = self.a**2 + self.b**2 + self.c**2
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"plane normal must be unit length, |n|^2 = {norm}")
        if not self.c > 0:
            raise ValueError("plane normal must point up (C > 0)")

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts[:, 0] * self.a + pts[:, 1] * self.b + pts[:, 2] * self.c + self.d

    def z_at(self, x, y):
        return -(self.a * x + self.b * y + self.d) / self.c

    @classmethod
    def horizontal(cls, z: float = DEFAULT_PLANE_Z) -> "PlaneModel":
        return cls(a=0.0, b=0.0, c=1.0, d=-z, inlier_count=0)


@dataclass(frozen=True)
class RansacParams:
    iterations: int = 100
    inlier_threshold: float = 0.1  # meters
    min_inlier_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")


def _plane_from_normal(normal: np.ndarray, point: np.ndarray,
                       inlier_count: int) -> PlaneModel:
    n = np.linalg.norm(normal)
    if n < 1e-12:
        raise DegenerateInputError("zero-length plane normal")
    normal = normal / n
    if abs(normal[2]) < 1e-12:
        raise DegenerateInputError("vertical plane: C-sign rule unsatisfiable")
    if normal[2] < 0:
        normal = -normal
    d = -float(normal @ point)
    return PlaneModel(a=float(normal[0]), b=float(normal[1]), c=float(normal[2]),
                      d=d, inlier_count=inlier_count)


def fit_plane_lsq(points: np.ndarray) -> PlaneModel:
    """Total-least-squares plane: smallest principal direction of the
    centered covariance."""
    pts = np.asarray(points, dtype=np.float64)[:, :3]
    if len(pts) < 3:
        raise DegenerateInputError(f"need >= 3 points, got {len(pts)}")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    # rank-deficient covariance means the points are (nearly) collinear
    scale = max(float(eigvals[-1]), 1e-30)
    if eigvals[1] / scale < 1e-12:
        raise DegenerateInputError("points are collinear; plane is not unique")
    normal = eigvecs[:, 0]
    return _plane_from_normal(normal, centroid, inlier_count=len(pts))


def fit_plane_ransac(points: np.ndarray, params: RansacParams) -> PlaneModel:
    """Best-consensus plane, refit by least squares on its inliers.

    Hypotheses are 3-point minimal samples; the winner is the hypothesis with
    the most inliers (ties broken by the lowest hypothesis index), which makes
    the result deterministic under the seed.
    """
    pts = np.asarray(points, dtype=np.float64)[:, :3]
    n = len(pts)
    if n < 3:
        raise DegenerateInputError(f"need >= 3 points, got {n}")

    rng = np.random.default_rng(params.seed)
    best_count = -1
    best_mask = None
    for _ in range(params.iterations):
        idx = rng.choice(n, size=3, replace=False)
        p0, p1, p2 = pts[idx]
        normal = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(normal)
        if norm < 1e-12 or abs(normal[2]) / norm < 1e-9:
            continue  # degenerate or vertical hypothesis
        normal = normal / norm
        d = -normal @ p0
        dist = np.abs(pts @ normal + d)
        mask = dist <= params.inlier_threshold
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask

    if best_mask is None or best_count < params.min_inlier_fraction * n:
        raise NoPlaneFoundError(
            f"consensus {max(best_count, 0)}/{n} below "
            f"min_inlier_fraction={params.min_inlier_fraction}"
        )
    refit = fit_plane_lsq(pts[best_mask])
    # report inliers against the refit model
    inliers = int((np.abs(refit.signed_distance(pts)) <= params.inlier_threshold).sum())
    return PlaneModel(a=refit.a, b=refit.b, c=refit.c, d=refit.d, inlier_count=inliers)


def estimate_ground_plane(points: np.ndarray,
                          params: RansacParams | None = None) -> PlaneModel:
    """Fit the ground from below-sensor points, falling back to the default
    horizontal plane when RANSAC finds no consensus."""
    if params is None:
        params = RansacParams()
    pts = np.asarray(points, dtype=np.float64)
    low = pts[pts[:, 2] < 0.0] if len(pts) else pts
    try:
        return fit_plane_ransac(low, params)
    except (DegenerateInputError, NoPlaneFoundError):
        return PlaneModel.horizontal()

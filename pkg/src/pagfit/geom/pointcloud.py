"""Point clouds, rigid poses, and the nearest-neighbor distances built on them.

Clouds are immutable after construction (the underlying arrays are marked
read-only) so they can be shared across threads and reused as KD-tree
sources.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..errors import EmptyCloudError

# below this many pairs the O(N*M) path is cheaper than building a KD-tree
_BRUTE_FORCE_PAIRS = 4096


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1 and pts.size == 3:
        pts = pts.reshape(1, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain non-finite coordinates")
    return pts


@dataclass(frozen=True)
class PointCloud:
    """A set of 3D points in meters, optionally carrying integer part labels."""

    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = _as_points(self.points)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (pts.shape[0],):
                raise ValueError(
                    f"labels must have shape ({pts.shape[0]},), got {lab.shape}"
                )
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def is_empty(self) -> bool:
        return self.points.shape[0] == 0

    def select(self, mask_or_indices) -> "PointCloud":
        """Sub-cloud by boolean mask or index array; labels follow."""
        pts = self.points[mask_or_indices]
        lab = None if self.labels is None else self.labels[mask_or_indices]
        return PointCloud(pts, lab)

    def part(self, label: int) -> "PointCloud":
        """Points carrying the given part label (requires a labeled cloud)."""
        if self.labels is None:
            raise ValueError("cloud has no labels")
        return self.select(self.labels == label)

    def centroid(self) -> np.ndarray:
        if self.is_empty:
            raise EmptyCloudError("centroid of empty cloud")
        return self.points.mean(axis=0)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.is_empty:
            raise EmptyCloudError("bounding box of empty cloud")
        return self.points.min(axis=0), self.points.max(axis=0)

    def kdtree(self) -> cKDTree:
        return cKDTree(self.points)


@dataclass(frozen=True)
class RigidPose:
    """Rigid transform x -> R x + t with R in SO(3)."""

    rotation: np.ndarray
    translation: np.ndarray
    _tol: float = field(default=1e-6, repr=False)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if np.linalg.norm(r.T @ r - np.eye(3)) > self._tol:
            raise ValueError("rotation is not orthonormal within tolerance")
        if np.linalg.det(r) <= 0:
            raise ValueError("rotation has non-positive determinant")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidPose":
        return RigidPose(np.eye(3), np.zeros(3))

    def inverse(self) -> "RigidPose":
        rt = self.rotation.T
        return RigidPose(rt, -rt @ self.translation)

    def compose(self, other: "RigidPose") -> "RigidPose":
        """self o other: apply ``other`` first, then ``self``."""
        return RigidPose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def transform(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation


def apply_pose(pose: RigidPose, cloud: PointCloud) -> PointCloud:
    """Map every point x -> R x + t; labels are preserved."""
    return PointCloud(pose.transform(cloud.points), cloud.labels)


def _check_nonempty(a: PointCloud | np.ndarray, b: PointCloud | np.ndarray):
    pa = a.points if isinstance(a, PointCloud) else np.asarray(a, dtype=np.float64)
    pb = b.points if isinstance(b, PointCloud) else np.asarray(b, dtype=np.float64)
    if pa.ndim != 2 or pb.ndim != 2:
        raise ValueError("expected (N, D) point arrays")
    if pa.shape[0] == 0 or pb.shape[0] == 0:
        raise EmptyCloudError("distance between empty clouds is undefined")
    return pa, pb


def nearest_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """For each point of ``a``, the Euclidean distance to its nearest point in ``b``.

    Uses a KD-tree above a small size cutoff; exhaustive search below it.
    Both give identical results.
    """
    if a.shape[0] * b.shape[0] <= _BRUTE_FORCE_PAIRS:
        diff = a[:, None, :] - b[None, :, :]
        return np.sqrt((diff * diff).sum(axis=2)).min(axis=1)
    dist, _ = cKDTree(b).query(a, k=1)
    return np.asarray(dist, dtype=np.float64)


def chamfer_distance(a, b) -> float:
    """Symmetric Chamfer distance between two clouds, in meters.

    Mean over ``a`` of the nearest-neighbor distance to ``b``, plus the
    mean over ``b`` of the nearest-neighbor distance to ``a``, halved.
    Distances are unsquared. Zero iff the clouds coincide as sets.
    """
    pa, pb = _check_nonempty(a, b)
    return 0.5 * (nearest_distances(pa, pb).mean() + nearest_distances(pb, pa).mean())


def min_pair_distance(a, b) -> float:
    """Smallest distance between any point of ``a`` and any point of ``b``.

    Zero iff the clouds touch.
    """
    pa, pb = _check_nonempty(a, b)
    return float(nearest_distances(pa, pb).min())

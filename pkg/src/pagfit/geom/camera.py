"""Pinhole camera intrinsics and point projection.

The world frame is the camera frame of the observation sequence; there is
no separate extrinsics type. Pixel coordinates are continuous:
(u, v) = (fx*x/z + cx, fy*y/z + cy).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonPositiveDepthError
from .pointcloud import PointCloud

DEPTH_EPS = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise ValueError("principal point must lie inside the image")

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
        }

    @staticmethod
    def from_dict(d: dict) -> "CameraIntrinsics":
        return CameraIntrinsics(
            fx=float(d["fx"]), fy=float(d["fy"]),
            cx=float(d["cx"]), cy=float(d["cy"]),
            width=int(d["width"]), height=int(d["height"]),
        )


def project_points(cloud: PointCloud | np.ndarray, k: CameraIntrinsics,
                   eps: float = DEPTH_EPS) -> np.ndarray:
    """Project 3D points to continuous pixel coordinates, shape (N, 2).

    Raises :class:`NonPositiveDepthError` if any point has depth z <= eps.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    z = pts[:, 2]
    if np.any(z <= eps):
        raise NonPositiveDepthError(
            f"{int((z <= eps).sum())} point(s) at or behind the camera plane"
        )
    u = k.fx * pts[:, 0] / z + k.cx
    v = k.fy * pts[:, 1] / z + k.cy
    return np.stack([u, v], axis=1)


def unproject_pixels(pixels: np.ndarray, depths: np.ndarray,
                     k: CameraIntrinsics) -> np.ndarray:
    """Inverse of :func:`project_points` at known depths, shape (N, 3)."""
    px = np.asarray(pixels, dtype=np.float64)
    z = np.asarray(depths, dtype=np.float64)
    x = (px[:, 0] - k.cx) * z / k.fx
    y = (px[:, 1] - k.cy) * z / k.fy
    return np.stack([x, y, z], axis=1)

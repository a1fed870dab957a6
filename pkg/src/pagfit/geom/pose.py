"""Per-frame rigid pose trajectories for one object."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pointcloud import RigidPose


@dataclass(frozen=True)
class PoseTrajectory:
    """Rotations (T, 3, 3) and translations (T, 3) over T frames."""

    rotations: np.ndarray
    translations: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotations, dtype=np.float64)
        tra = np.asarray(self.translations, dtype=np.float64)
        if rot.ndim != 3 or rot.shape[1:] != (3, 3):
            raise ValueError(f"rotations must be (T, 3, 3), got {rot.shape}")
        if tra.shape != (rot.shape[0], 3):
            raise ValueError(f"translations must be (T, 3), got {tra.shape}")
        rot.setflags(write=False)
        tra.setflags(write=False)
        object.__setattr__(self, "rotations", rot)
        object.__setattr__(self, "translations", tra)

    @property
    def frame_count(self) -> int:
        return self.rotations.shape[0]

    def pose(self, t: int) -> RigidPose:
        return RigidPose(self.rotations[t], self.translations[t])

    def transform_frame(self, t: int, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotations[t].T + self.translations[t]

    def transform_all(self, points: np.ndarray) -> np.ndarray:
        """Apply every frame's pose to the same canonical points -> (T, N, 3)."""
        pts = np.asarray(points, dtype=np.float64)
        return np.einsum("tij,nj->tni", self.rotations, pts) + self.translations[:, None, :]

    @staticmethod
    def identity(frame_count: int) -> "PoseTrajectory":
        return PoseTrajectory(
            np.tile(np.eye(3), (frame_count, 1, 1)), np.zeros((frame_count, 3))
        )

    def to_dict(self) -> dict:
        """Per-frame row-major 3x3 rotation plus translation, JSON-ready."""
        return {
            "frames": [
                {
                    "rotation": [float(x) for x in self.rotations[t].reshape(9)],
                    "translation": [float(x) for x in self.translations[t]],
                }
                for t in range(self.frame_count)
            ]
        }

    @staticmethod
    def from_dict(d: dict) -> "PoseTrajectory":
        frames = d["frames"]
        rot = np.array([np.reshape(f["rotation"], (3, 3)) for f in frames], dtype=np.float64)
        tra = np.array([f["translation"] for f in frames], dtype=np.float64)
        return PoseTrajectory(rot, tra)

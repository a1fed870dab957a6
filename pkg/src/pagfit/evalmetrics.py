"""Quantitative metrics over fitted interaction sequences: temporal
smoothness, motion diversity, and physical plausibility.

Human metrics run over body joints; object metrics over the 8 posed
bounding-box corners of each object's canonical cloud. Plausibility
queries each object's SDF (in its canonical frame) at every human body
vertex: a vertex "collides" when its signed distance falls below the
tolerance, i.e. it is inside the object or within the tolerance band of
the surface.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooFewFramesError, TooFewSamplesError
from .geom import PointCloud, PoseTrajectory, SdfGrid, query_sdf
from .hoiopt.data import HumanMotionSequence

COLLISION_TOLERANCE = 0.005  # meters


@dataclass(frozen=True)
class InteractionSample:
    """One generated interaction: humans, per-object trajectories, and the
    canonical object geometry the trajectories pose."""
    humans: tuple[HumanMotionSequence, ...]
    trajectories: dict[str, PoseTrajectory]
    objects: dict[str, PointCloud]

    @property
    def frame_count(self) -> int:
        return self.humans[0].frame_count if self.humans else \
            next(iter(self.trajectories.values())).frame_count


def box_corners(cloud: PointCloud) -> np.ndarray:
    """The 8 axis-aligned bounding-box corners of a cloud, shape (8, 3)."""
    lo, hi = cloud.bounding_box()
    return np.array([[x, y, z] for x in (lo[0], hi[0])
                     for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])


def _posed_corner_tracks(sample: InteractionSample) -> list[np.ndarray]:
    """Per object: (T, 8, 3) posed bounding-box corner tracks."""
    tracks = []
    for oid in sorted(sample.trajectories):
        corners = box_corners(sample.objects[oid])
        tracks.append(sample.trajectories[oid].transform_all(corners))
    return tracks


def _midpoint_deviation(track: np.ndarray) -> float:
    """Mean over interior frames and points of the distance to the
    neighbor-average position; zero for constant-velocity motion."""
    dev = track[1:-1] - 0.5 * (track[:-2] + track[2:])
    return float(np.linalg.norm(dev, axis=2).mean())


def temporal_smoothness(sample: InteractionSample) -> dict[str, float]:
    """Midpoint-deviation smoothness for human joints and object box corners."""
    if sample.frame_count < 3:
        raise TooFewFramesError("temporal smoothness needs at least 3 frames")
    human_tracks = [h.joints for h in sample.humans]
    object_tracks = _posed_corner_tracks(sample)
    out = {}
    out["human"] = (float(np.mean([_midpoint_deviation(tr) for tr in human_tracks]))
                    if human_tracks else 0.0)
    out["object"] = (float(np.mean([_midpoint_deviation(tr) for tr in object_tracks]))
                     if object_tracks else 0.0)
    return out


def motion_diversity(samples: list[InteractionSample]) -> dict[str, float]:
    """Mean pairwise positional distance across samples.

    Averaged over unordered sample pairs, then joints (or corners) and
    frames; requires every sample to share frame counts, joint counts,
    and object sets.
    """
    if len(samples) < 2:
        raise TooFewSamplesError("diversity needs at least 2 samples")

    def pair_mean(tracks: list[list[np.ndarray]]) -> float:
        k = len(tracks)
        vals = []
        for a in range(k):
            for b in range(a + 1, k):
                for ta, tb in zip(tracks[a], tracks[b], strict=True):
                    if ta.shape != tb.shape:
                        raise ValueError("samples have inconsistent track shapes")
                    vals.append(np.linalg.norm(ta - tb, axis=2).mean())
        return float(np.mean(vals)) if vals else 0.0

    human_tracks = [[h.joints for h in s.humans] for s in samples]
    object_tracks = [_posed_corner_tracks(s) for s in samples]
    return {"human": pair_mean(human_tracks), "object": pair_mean(object_tracks)}


def physical_plausibility(sample: InteractionSample, sdfs: dict[str, SdfGrid],
                          tolerance: float = COLLISION_TOLERANCE) -> dict[str, float]:
    """Non-collision and contact scores in [0, 1].

    non_collision: mean over frames of the fraction of human body vertices
    not colliding with any object. contact: fraction of frames in which at
    least one vertex collides.
    """
    t = sample.frame_count
    all_verts = np.concatenate([h.body_vertices for h in sample.humans], axis=1) \
        if sample.humans else np.zeros((t, 0, 3))
    v = all_verts.shape[1]
    if v == 0:
        return {"non_collision": 1.0, "contact": 0.0}
    ratios = np.zeros(t)
    frames_with_collision = 0
    for f in range(t):
        colliding = np.zeros(v, dtype=bool)
        for oid, grid in sdfs.items():
            traj = sample.trajectories[oid]
            canon = (all_verts[f] - traj.translations[f]) @ traj.rotations[f]
            colliding |= query_sdf(grid, canon) < tolerance
        ratios[f] = 1.0 - colliding.mean()
        frames_with_collision += bool(colliding.any())
    return {"non_collision": float(ratios.mean()),
            "contact": frames_with_collision / t}


def evaluate_sample(sample: InteractionSample, sdfs: dict[str, SdfGrid],
                    tolerance: float = COLLISION_TOLERANCE) -> dict:
    """Single-sample metrics bundle (smoothness + plausibility)."""
    return {
        "temporal_smoothness": temporal_smoothness(sample),
        "physical_plausibility": physical_plausibility(sample, sdfs, tolerance),
    }

"""Procedural stick-figure humans: ellipsoid point clusters per body part.

These are not body-model meshes; they exist to exercise every human-facing
code path (contact, penetration, metrics) with exact, controllable
geometry. Per-part point counts and ordering are frame-consistent by
construction.
"""
from __future__ import annotations

import numpy as np

from ..hoiopt.data import HumanMotionSequence
from ..pag import BODY_PART_VOCABULARY

# local offsets of each part's center from the pelvis, in meters
_PART_OFFSETS = {
    "head": (0.0, 0.70, 0.0),
    "torso": (0.0, 0.35, 0.0),
    "back": (0.0, 0.35, -0.10),
    "hips": (0.0, 0.0, 0.0),
    "left_upper_arm": (-0.25, 0.45, 0.0),
    "right_upper_arm": (0.25, 0.45, 0.0),
    "left_hand": (-0.40, 0.10, 0.05),
    "right_hand": (0.40, 0.10, 0.05),
    "left_leg": (-0.10, -0.45, 0.0),
    "right_leg": (0.10, -0.45, 0.0),
    "left_foot": (-0.10, -0.90, 0.06),
    "right_foot": (0.10, -0.90, 0.06),
}

_PART_RADII = {
    "head": 0.10, "torso": 0.16, "back": 0.14, "hips": 0.14,
    "left_upper_arm": 0.06, "right_upper_arm": 0.06,
    "left_hand": 0.045, "right_hand": 0.045,
    "left_leg": 0.08, "right_leg": 0.08,
    "left_foot": 0.05, "right_foot": 0.05,
}


def _part_cluster(radius: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Fixed ellipsoid-surface offsets for one part, shape (n, 3)."""
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * radius * np.array([1.0, 1.3, 0.8])


def build_human(pelvis_track: np.ndarray, rng: np.random.Generator,
                points_per_part: int = 24,
                part_tracks: dict[str, np.ndarray] | None = None,
                ) -> HumanMotionSequence:
    """Assemble a human from a pelvis path, with optional part overrides.

    ``pelvis_track``: (T, 3) pelvis positions. ``part_tracks`` replaces the
    default offset-following clusters for specific parts with explicit
    (T, M, 3) point tracks (used to pin a hand onto an object).
    """
    pelvis = np.asarray(pelvis_track, dtype=np.float64)
    t = pelvis.shape[0]
    part_tracks = part_tracks or {}
    parts: dict[str, np.ndarray] = {}
    centers: dict[str, np.ndarray] = {}
    for name in BODY_PART_VOCABULARY:
        if name in part_tracks:
            track = np.asarray(part_tracks[name], dtype=np.float64)
            if track.shape[0] != t:
                raise ValueError(f"override for {name!r} has wrong frame count")
            parts[name] = track
            centers[name] = track.mean(axis=1)
            continue
        cluster = _part_cluster(_PART_RADII[name], points_per_part, rng)
        center = pelvis + np.asarray(_PART_OFFSETS[name])
        parts[name] = center[:, None, :] + cluster[None, :, :]
        centers[name] = center
    joints = np.stack([centers[name] for name in BODY_PART_VOCABULARY], axis=1)
    joints = np.concatenate([joints, pelvis[:, None, :]], axis=1)  # pelvis joint
    body_vertices = np.concatenate([parts[n] for n in BODY_PART_VOCABULARY], axis=1)
    return HumanMotionSequence(joints=joints, parts=parts,
                               body_vertices=body_vertices)


def idle_pelvis_track(t: int, base: tuple, sway: float = 0.02) -> np.ndarray:
    """Standing pelvis path with a gentle sinusoidal sway."""
    base = np.asarray(base, dtype=np.float64)
    phase = np.linspace(0.0, 2.0 * np.pi, t)
    track = np.tile(base, (t, 1))
    track[:, 0] += sway * np.sin(phase)
    track[:, 1] += 0.5 * sway * np.sin(2.0 * phase)
    return track

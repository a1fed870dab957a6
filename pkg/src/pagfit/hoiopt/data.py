"""Data carried into the trajectory optimization: per-frame observations,
human motion, loss weights, and the assembled scene."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import FrameCountMismatchError, SceneValidationError
from ..geom import CameraIntrinsics, PointCloud, SdfGrid
from ..pag import ConstraintSet, PartAffordanceGraph, SceneBinding, resolve_constraints


@dataclass
class FrameObservation:
    """Evidence for one object at one frame; any field may be absent.

    ``part_points`` / ``part_pixels`` are keyed by part node id. Pixels are
    continuous (u, v) image coordinates, shape (P, 2).
    """
    object_points: np.ndarray | None = None
    part_points: dict[str, np.ndarray] = field(default_factory=dict)
    object_pixels: np.ndarray | None = None
    part_pixels: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class ObservationBundle:
    """Per-frame targets for one object plus the shared camera intrinsics."""
    frames: list[FrameObservation]
    intrinsics: CameraIntrinsics

    @property
    def frame_count(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class HumanMotionSequence:
    """Recovered human motion: joints, per-body-part clouds, body vertices.

    Per-part point counts and ordering are frame-consistent, which the
    index-wise contact dynamics term relies on.
    """
    joints: np.ndarray                 # (T, J, 3)
    parts: dict[str, np.ndarray]       # body part -> (T, M, 3)
    body_vertices: np.ndarray          # (T, V, 3)

    def __post_init__(self):
        j = np.asarray(self.joints, dtype=np.float64)
        bv = np.asarray(self.body_vertices, dtype=np.float64)
        if j.ndim != 3 or j.shape[2] != 3:
            raise ValueError(f"joints must be (T, J, 3), got {j.shape}")
        t = j.shape[0]
        if bv.ndim != 3 or bv.shape[0] != t or bv.shape[2] != 3:
            raise ValueError(f"body_vertices must be ({t}, V, 3), got {bv.shape}")
        parts = {}
        for name, arr in self.parts.items():
            a = np.asarray(arr, dtype=np.float64)
            if a.ndim != 3 or a.shape[0] != t or a.shape[2] != 3:
                raise ValueError(f"part {name!r} must be ({t}, M, 3), got {a.shape}")
            parts[name] = a
        object.__setattr__(self, "joints", j)
        object.__setattr__(self, "body_vertices", bv)
        object.__setattr__(self, "parts", parts)

    @property
    def frame_count(self) -> int:
        return self.joints.shape[0]


@dataclass(frozen=True)
class LossWeights:
    """Weights of the four loss groups in the total objective."""
    fit: float = 1.0
    contact: float = 1.0
    penetration: float = 10.0
    smooth: float = 0.1

    def __post_init__(self):
        vals = (self.fit, self.contact, self.penetration, self.smooth)
        if any(w < 0 for w in vals):
            raise ValueError("loss weights must be nonnegative")
        if all(w == 0 for w in vals):
            raise ValueError("at least one loss weight must be positive")


@dataclass
class Scene:
    """Everything the optimizer consumes, in one validated bundle.

    Objects and humans are keyed by their virtual node id in the graph.
    Canonical clouds carry integer labels indexing ``graph.part_nodes``.
    """
    graph: PartAffordanceGraph
    objects: dict[str, PointCloud]
    sdfs: dict[str, SdfGrid]
    observations: dict[str, ObservationBundle]
    humans: dict[str, HumanMotionSequence]
    intrinsics: CameraIntrinsics

    def object_ids(self) -> list[str]:
        return [v.id for v in self.graph.object_virtuals()]

    def human_ids(self) -> list[str]:
        return [v.id for v in self.graph.human_virtuals()]

    def part_indices(self, object_id: str) -> dict[str, int]:
        """Part node id -> integer label used in the object's cloud."""
        return {
            p.id: i for i, p in enumerate(self.graph.part_nodes)
            if p.owner == object_id
        }

    def binding(self) -> SceneBinding:
        object_parts = {}
        for oid, cloud in self.objects.items():
            present = set() if cloud.labels is None else set(np.unique(cloud.labels))
            labels = frozenset(
                p.label for i, p in enumerate(self.graph.part_nodes)
                if p.owner == oid and i in present
            )
            object_parts[oid] = labels
        human_parts = {
            hid: frozenset(h.parts.keys()) for hid, h in self.humans.items()
        }
        return SceneBinding(object_parts, human_parts)

    def constraints(self) -> ConstraintSet:
        return resolve_constraints(self.graph, self.binding())

    def validate(self) -> None:
        """Raise if ids, frame counts, or part bindings are inconsistent."""
        t = self.graph.frame_count
        for oid in self.object_ids():
            if oid not in self.objects:
                raise SceneValidationError(f"object {oid!r} has no canonical cloud")
            if oid not in self.observations:
                raise SceneValidationError(f"object {oid!r} has no observations")
            if self.observations[oid].frame_count != t:
                raise FrameCountMismatchError(
                    f"observations for {oid!r} have {self.observations[oid].frame_count} "
                    f"frames, graph says {t}"
                )
        for hid in self.human_ids():
            if hid not in self.humans:
                raise SceneValidationError(f"human {hid!r} has no motion sequence")
            if self.humans[hid].frame_count != t:
                raise FrameCountMismatchError(
                    f"human {hid!r} has {self.humans[hid].frame_count} frames, "
                    f"graph says {t}"
                )
        for oid in self.object_ids():
            cloud = self.objects[oid]
            if cloud.is_empty:
                raise SceneValidationError(f"object {oid!r} cloud is empty")
            if cloud.labels is not None:
                owned = set(self.part_indices(oid).values())
                present = set(np.unique(cloud.labels))
                if present - owned:
                    raise SceneValidationError(
                        f"object {oid!r} cloud labels {sorted(present - owned)} "
                        f"do not resolve to its part nodes"
                    )
            if self.humans and oid not in self.sdfs:
                raise SceneValidationError(
                    f"object {oid!r} has no SDF but humans are present"
                )
        self.constraints()  # raises BindingError on unbound parts

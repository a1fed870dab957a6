"""Synthetic ground-truth scenes: trajectories that satisfy a part
affordance graph exactly, plus derived noisy observations.

Generation is constructive, not a constraint solver: each trajectory
family is parameterized so that the graph's motion flags and contact
edges hold exactly on the noiseless output. Specs that the construction
cannot satisfy (contradictory attachments, flag/family mismatches) raise
:class:`InfeasibleSpecError`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import InfeasibleSpecError
from ..geom import CameraIntrinsics, PointCloud, PoseTrajectory, SdfGrid, project_points
from ..hoiopt.data import FrameObservation, HumanMotionSequence, ObservationBundle, Scene
from ..pag import (
    ContactEdge,
    PartAffordanceGraph,
    PartNode,
    VirtualNode,
    parse_pag,
    serialize_pag,
)
from .human import build_human, idle_pelvis_track
from .primitives import ObjectModel, briefcase_model

FAMILIES = ("stationary", "linear", "circular_arc", "hand_follow")

# motion flags (rotates, translates) each family produces
FAMILY_FLAGS = {
    "stationary": (False, False),
    "linear": (False, True),
    "circular_arc": (True, True),
    "hand_follow": (True, True),
}


@dataclass(frozen=True)
class NoiseModel:
    sigma: float = 0.0          # gaussian point noise, meters
    mask_dilation: int = 0      # binary dilation radius when rasterizing masks
    dropout: float = 0.0        # per-frame probability of a missing observation

    def __post_init__(self):
        if self.sigma < 0 or not (0.0 <= self.dropout < 1.0):
            raise ValueError("invalid noise model")


@dataclass(frozen=True)
class ObjectScenario:
    object_id: str
    model: ObjectModel
    family: str
    base_position: tuple = (0.0, 0.0, 2.2)
    velocity: tuple = (0.55, 0.0, 0.12)        # linear / hand_follow drift
    arc_radius: float = 0.5                    # circular_arc
    arc_angle: float = 1.2                     # radians swept over the sequence
    swing_amplitude: float = 0.14              # hand_follow pendulum, radians
    bob_amplitude: float = 0.03                # hand_follow vertical bob, meters

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown trajectory family {self.family!r}")


@dataclass(frozen=True)
class ScenarioSpec:
    objects: tuple[ObjectScenario, ...]
    graph: PartAffordanceGraph
    noise: NoiseModel = NoiseModel()
    seed: int = 0
    points_per_part: int = 96
    human_points_per_part: int = 24
    sdf_resolution: int = 48
    intrinsics: CameraIntrinsics = field(
        default_factory=lambda: CameraIntrinsics(220.0, 220.0, 128.0, 128.0, 256, 256))

    @property
    def frame_count(self) -> int:
        return self.graph.frame_count

    def to_json(self) -> str:
        doc = {
            "version": 1,
            "seed": self.seed,
            "points_per_part": self.points_per_part,
            "human_points_per_part": self.human_points_per_part,
            "sdf_resolution": self.sdf_resolution,
            "intrinsics": self.intrinsics.to_dict(),
            "noise": {"sigma": self.noise.sigma,
                      "mask_dilation": self.noise.mask_dilation,
                      "dropout": self.noise.dropout},
            "objects": [
                {
                    "object_id": o.object_id,
                    "model": o.model.to_dict(),
                    "family": o.family,
                    "base_position": list(o.base_position),
                    "velocity": list(o.velocity),
                    "arc_radius": o.arc_radius,
                    "arc_angle": o.arc_angle,
                    "swing_amplitude": o.swing_amplitude,
                    "bob_amplitude": o.bob_amplitude,
                }
                for o in self.objects
            ],
            "pag": json.loads(serialize_pag(self.graph)),
        }
        return json.dumps(doc, indent=2)

    @staticmethod
    def from_json(text: str) -> "ScenarioSpec":
        doc = json.loads(text)
        noise = NoiseModel(**doc.get("noise", {}))
        objects = tuple(
            ObjectScenario(
                object_id=o["object_id"],
                model=ObjectModel.from_dict(o["model"]),
                family=o["family"],
                base_position=tuple(o.get("base_position", (0.0, 0.0, 2.2))),
                velocity=tuple(o.get("velocity", (0.55, 0.0, 0.12))),
                arc_radius=o.get("arc_radius", 0.5),
                arc_angle=o.get("arc_angle", 1.2),
                swing_amplitude=o.get("swing_amplitude", 0.14),
                bob_amplitude=o.get("bob_amplitude", 0.03),
            )
            for o in doc["objects"]
        )
        return ScenarioSpec(
            objects=objects,
            graph=parse_pag(json.dumps(doc["pag"])),
            noise=noise,
            seed=int(doc.get("seed", 0)),
            points_per_part=int(doc.get("points_per_part", 96)),
            human_points_per_part=int(doc.get("human_points_per_part", 24)),
            sdf_resolution=int(doc.get("sdf_resolution", 48)),
            intrinsics=CameraIntrinsics.from_dict(doc["intrinsics"])
            if "intrinsics" in doc else
            CameraIntrinsics(220.0, 220.0, 128.0, 128.0, 256, 256),
        )


@dataclass
class SynthScene:
    scene: Scene
    ground_truth: dict[str, PoseTrajectory]
    spec: ScenarioSpec


# ---------------------------------------------------------------------------
# trajectory families

def _rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def family_trajectory(obj: ObjectScenario, t: int) -> PoseTrajectory:
    s = np.linspace(0.0, 1.0, t)
    base = np.asarray(obj.base_position, dtype=np.float64)
    if obj.family == "stationary":
        rot = np.tile(np.eye(3), (t, 1, 1))
        tra = np.tile(base, (t, 1))
    elif obj.family == "linear":
        rot = np.tile(np.eye(3), (t, 1, 1))
        tra = base + np.outer(s, np.asarray(obj.velocity))
    elif obj.family == "circular_arc":
        theta = obj.arc_angle * s
        rot = np.stack([_rot_y(a) for a in theta])
        tra = base + obj.arc_radius * np.stack(
            [np.sin(theta), np.zeros(t), np.cos(theta) - 1.0], axis=1)
    else:  # hand_follow: linear carry with a pendulum swing and bob
        phase = 2.0 * np.pi * s
        rot = np.stack([_rot_z(obj.swing_amplitude * np.sin(p)) for p in phase])
        tra = base + np.outer(s, np.asarray(obj.velocity))
        tra[:, 1] += obj.bob_amplitude * np.sin(phase)
    return PoseTrajectory(rot, tra)


# ---------------------------------------------------------------------------
# spec builders

def standard_spec(family: str, frame_count: int = 49, seed: int = 0,
                  noise: NoiseModel = NoiseModel(),
                  object_id: str = "case", human_id: str = "person",
                  points_per_part: int = 96) -> ScenarioSpec:
    """Briefcase-and-person scenario for one trajectory family.

    hand_follow adds a continuous static contact edge between the handle
    and the person's right hand; the other families keep the person idle
    beside the object.
    """
    rotates, translates = FAMILY_FLAGS[family]
    virtuals = [
        VirtualNode(object_id, "object", rotates, translates),
        VirtualNode(human_id, "human"),
    ]
    parts = [
        PartNode(f"{object_id}.body", "object_part", object_id, "body"),
        PartNode(f"{object_id}.handle", "object_part", object_id, "handle"),
        PartNode(f"{object_id}.latch", "object_part", object_id, "latch"),
        PartNode(f"{human_id}.right_hand", "human_part", human_id, "right_hand"),
    ]
    edges = []
    if family == "hand_follow":
        edges.append(ContactEdge(f"{object_id}.handle", f"{human_id}.right_hand",
                                 continuous=True, static_contact=True))
    graph = PartAffordanceGraph(tuple(virtuals), tuple(parts), tuple(edges),
                                frame_count)
    return ScenarioSpec(
        objects=(ObjectScenario(object_id, briefcase_model(), family),),
        graph=graph, noise=noise, seed=seed, points_per_part=points_per_part,
    )


# ---------------------------------------------------------------------------
# generation

def _feasibility(spec: ScenarioSpec) -> None:
    graph = spec.graph
    by_id = {o.object_id: o for o in spec.objects}
    for v in graph.object_virtuals():
        if v.id not in by_id:
            raise InfeasibleSpecError(f"graph object {v.id!r} has no scenario entry")
        family = by_id[v.id].family
        expected = FAMILY_FLAGS[family]
        if (v.rotates, v.translates) != expected:
            raise InfeasibleSpecError(
                f"object {v.id!r}: family {family!r} produces motion flags "
                f"{expected}, graph declares ({v.rotates}, {v.translates})"
            )
        model_labels = {p.label for p in by_id[v.id].model.parts}
        graph_labels = {p.label for p in graph.parts_of(v.id)}
        if graph_labels - model_labels:
            raise InfeasibleSpecError(
                f"object {v.id!r}: model lacks parts {sorted(graph_labels - model_labels)}"
            )
    part_by_id = {p.id: p for p in graph.part_nodes}
    attached: dict[str, str] = {}  # human part node -> object id
    for e in graph.edges:
        second = part_by_id[e.second]
        if second.kind == "object_part":
            raise InfeasibleSpecError(
                "object-object contact edges are not constructively supported"
            )
        first_owner = part_by_id[e.first].owner
        if second.id in attached and attached[second.id] != first_owner:
            raise InfeasibleSpecError(
                f"human part {second.id!r} is attached to two objects"
            )
        if second.id in attached:
            raise InfeasibleSpecError(
                f"human part {second.id!r} carries more than one contact edge"
            )
        attached[second.id] = first_owner


def _hand_cluster(anchor: np.ndarray, model: ObjectModel, n: int,
                  rng: np.random.Generator) -> np.ndarray:
    """n grip points around (and including) the anchor, outside the solid.

    The cluster is kept tight (sub-centimeter) so that pulling the handle
    to the hand actually closes the gap rather than hovering at the
    cluster's spread.
    """
    cluster = [anchor]
    tries = 0
    while len(cluster) < n:
        cand = anchor + rng.normal(size=(4 * n, 3)) * 0.004 + np.array([0, 0.008, 0])
        good = cand[model.sdf(cand) > 1e-6]
        cluster.extend(good[: n - len(cluster)])
        tries += 1
        if tries > 20:
            raise InfeasibleSpecError("could not place hand points outside the object")
    return np.asarray(cluster)


def generate_scene(spec: ScenarioSpec) -> SynthScene:
    """Ground-truth trajectories, geometry, humans, and noisy observations.

    On the noiseless output the graph holds exactly: continuous edges have
    zero min pair distance at every frame, static edges zero relative
    motion in the object's canonical frame, and motion flags match the
    trajectory family. Deterministic per seed.
    """
    _feasibility(spec)
    graph = spec.graph
    t = spec.frame_count
    part_global = {p.id: i for i, p in enumerate(graph.part_nodes)}

    objects: dict[str, PointCloud] = {}
    sdfs: dict[str, SdfGrid] = {}
    ground_truth: dict[str, PoseTrajectory] = {}
    scenarios = {o.object_id: o for o in spec.objects}

    part_samples: dict[str, dict[str, np.ndarray]] = {}
    for k, obj in enumerate(spec.objects):
        rng = np.random.default_rng([spec.seed, 1, k])
        samples = {}
        pts_list = []
        labels_list = []
        for node in graph.parts_of(obj.object_id):
            prim = next(p for p in obj.model.parts if p.label == node.label)
            pts = prim.sample_surface(spec.points_per_part, rng)
            samples[node.id] = pts
            pts_list.append(pts)
            labels_list.append(np.full(len(pts), part_global[node.id]))
        part_samples[obj.object_id] = samples
        objects[obj.object_id] = PointCloud(np.vstack(pts_list),
                                            np.concatenate(labels_list))
        ground_truth[obj.object_id] = family_trajectory(obj, t)

        lo, hi = obj.model.bounds(margin=0.15)
        cell = float((hi - lo).max()) / (spec.sdf_resolution - 1)
        dims = np.maximum(np.ceil((hi - lo) / cell).astype(int) + 1, 2)
        sdfs[obj.object_id] = SdfGrid.from_function(obj.model.sdf, lo, cell, dims)

    # humans: one per graph human node; hands pinned by contact edges
    part_by_id = {p.id: p for p in graph.part_nodes}
    humans: dict[str, HumanMotionSequence] = {}
    for k, hv in enumerate(graph.human_virtuals()):
        rng = np.random.default_rng([spec.seed, 2, k])
        overrides: dict[str, np.ndarray] = {}
        pelvis = None
        for e in graph.edges:
            second = part_by_id[e.second]
            if second.owner != hv.id:
                continue
            oid = part_by_id[e.first].owner
            obj = scenarios[oid]
            handle_pts = part_samples[oid][e.first]
            anchor = handle_pts[np.argmax(handle_pts[:, 1])]  # topmost sample
            cluster = _hand_cluster(anchor, obj.model,
                                    spec.human_points_per_part, rng)
            traj = ground_truth[oid]
            track = traj.transform_all(cluster)
            overrides[second.label] = track
            centers = track.mean(axis=1)
            pelvis = centers - np.array([0.50, 0.10, 0.05])
        if pelvis is None:
            base = np.asarray(spec.objects[0].base_position) + np.array([-1.1, 0.0, 0.1])
            pelvis = idle_pelvis_track(t, base)
        humans[hv.id] = build_human(pelvis, rng,
                                    points_per_part=spec.human_points_per_part,
                                    part_tracks=overrides)

    # observations: posed clouds plus noise, projected pixel sets
    observations: dict[str, ObservationBundle] = {}
    for k, obj in enumerate(spec.objects):
        rng = np.random.default_rng([spec.seed, 3, k])
        cloud = objects[obj.object_id]
        traj = ground_truth[obj.object_id]
        frames = []
        for i in range(t):
            dropped = rng.random() < spec.noise.dropout
            if dropped:
                frames.append(FrameObservation())
                continue
            posed = traj.transform_frame(i, cloud.points)
            noisy = posed + spec.noise.sigma * rng.normal(size=posed.shape)
            pixels = project_points(noisy, spec.intrinsics)
            part_points = {}
            part_pixels = {}
            for node in graph.parts_of(obj.object_id):
                sel = cloud.labels == part_global[node.id]
                part_points[node.id] = noisy[sel]
                part_pixels[node.id] = pixels[sel]
            frames.append(FrameObservation(
                object_points=noisy, part_points=part_points,
                object_pixels=pixels, part_pixels=part_pixels,
            ))
        observations[obj.object_id] = ObservationBundle(frames, spec.intrinsics)

    scene = Scene(graph=graph, objects=objects, sdfs=sdfs,
                  observations=observations, humans=humans,
                  intrinsics=spec.intrinsics)
    scene.validate()
    return SynthScene(scene=scene, ground_truth=ground_truth, spec=spec)

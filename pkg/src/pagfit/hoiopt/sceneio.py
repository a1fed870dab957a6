"""On-disk formats for scenes, observations, human motion, and results.

Layout of a scene directory (paths in the manifest are relative to it)::

    scene.json                  manifest (see load_scene)
    pag.json                    part affordance graph
    intrinsics.json             shared pinhole intrinsics
    objects/<id>.ply            canonical labeled cloud (part_label =
                                index into the PAG's part_nodes)
    objects/<id>.sdf            signed distance grid (raw binary)
    humans/<id>.json            human motion (joints/parts/body_vertices)
    obs/<id>/frame_%03d/        per-frame observations:
        points.ply              object-level cloud
        points_p<gi>.ply        cloud of part with global index <gi>
        mask.png                object mask (nonzero = inside)
        mask_p<gi>.png          part mask

A missing frame directory means the frame has no observations. Mask
pixels are read back as pixel centers (col + 0.5, row + 0.5).
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import FormatError
from ..geom import (
    CameraIntrinsics,
    PointCloud,
    PoseTrajectory,
    load_ply_cloud,
    load_sdf,
    save_ply_cloud,
    save_sdf,
)
from ..pag import load_pag, serialize_pag
from .data import FrameObservation, HumanMotionSequence, ObservationBundle, Scene
from .optimize import TraceRow

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# intrinsics

def save_intrinsics(k: CameraIntrinsics, path) -> None:
    Path(path).write_text(json.dumps(k.to_dict(), indent=2))


def load_intrinsics(path) -> CameraIntrinsics:
    return CameraIntrinsics.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# masks

def save_mask(pixels: np.ndarray | None, width: int, height: int, path,
              dilation: int = 0) -> None:
    """Rasterize continuous pixel coordinates into a binary PNG mask."""
    img = np.zeros((height, width), dtype=bool)
    if pixels is not None and len(pixels):
        col = np.floor(pixels[:, 0]).astype(int)
        row = np.floor(pixels[:, 1]).astype(int)
        ok = (col >= 0) & (col < width) & (row >= 0) & (row < height)
        img[row[ok], col[ok]] = True
    if dilation > 0:
        from scipy.ndimage import binary_dilation
        img = binary_dilation(img, iterations=dilation)
    Image.fromarray(img.astype(np.uint8) * 255).save(path)


def load_mask(path) -> np.ndarray:
    """Boolean (H, W) array; nonzero pixels count as inside."""
    return np.asarray(Image.open(path).convert("L")) > 0


def mask_pixels(mask: np.ndarray) -> np.ndarray:
    """Pixel-center coordinates (u, v) of all true pixels, shape (P, 2)."""
    row, col = np.nonzero(mask)
    return np.stack([col + 0.5, row + 0.5], axis=1).astype(np.float64)


# ---------------------------------------------------------------------------
# human motion

def save_human_motion(h: HumanMotionSequence, path) -> None:
    doc = {
        "version": FORMAT_VERSION,
        "frame_count": h.frame_count,
        "joints": h.joints.tolist(),
        "parts": {name: arr.tolist() for name, arr in h.parts.items()},
        "body_vertices": h.body_vertices.tolist(),
    }
    Path(path).write_text(json.dumps(doc))


def load_human_motion(path) -> HumanMotionSequence:
    doc = json.loads(Path(path).read_text())
    return HumanMotionSequence(
        joints=np.asarray(doc["joints"], dtype=np.float64),
        parts={k: np.asarray(v, dtype=np.float64) for k, v in doc["parts"].items()},
        body_vertices=np.asarray(doc["body_vertices"], dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# trajectories

def save_trajectories(trajectories: dict[str, PoseTrajectory], path) -> None:
    frame_count = next(iter(trajectories.values())).frame_count
    doc = {
        "version": FORMAT_VERSION,
        "frame_count": frame_count,
        "objects": {oid: tr.to_dict() for oid, tr in sorted(trajectories.items())},
    }
    Path(path).write_text(json.dumps(doc))


def load_trajectories(path) -> dict[str, PoseTrajectory]:
    doc = json.loads(Path(path).read_text())
    return {oid: PoseTrajectory.from_dict(d) for oid, d in doc["objects"].items()}


def save_trace(trace: list[TraceRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["restart", "step", "total", "fit", "contact",
                         "penetration", "smooth"])
        for row in trace:
            writer.writerow([row.restart, row.step, repr(row.total),
                             repr(row.fit), repr(row.contact),
                             repr(row.penetration), repr(row.smooth)])


# ---------------------------------------------------------------------------
# observation bundles

def _frame_dir(root: Path, index: int) -> Path:
    return root / f"frame_{index:03d}"


def save_observations(bundle: ObservationBundle, root,
                      dilation: int = 0) -> None:
    root = Path(root)
    k = bundle.intrinsics
    for i, frame in enumerate(bundle.frames):
        has_any = (frame.object_points is not None or frame.part_points
                   or frame.object_pixels is not None or frame.part_pixels)
        if not has_any:
            continue
        fdir = _frame_dir(root, i)
        fdir.mkdir(parents=True, exist_ok=True)
        if frame.object_points is not None:
            save_ply_cloud(PointCloud(frame.object_points), fdir / "points.ply")
        for pid, pts in sorted(frame.part_points.items()):
            gi = pid if isinstance(pid, int) else None
            if gi is None:
                raise FormatError(
                    "save_observations needs part keys as global indices; "
                    "use save_scene for id-keyed bundles")
            save_ply_cloud(PointCloud(pts), fdir / f"points_p{gi}.ply")
        if frame.object_pixels is not None:
            save_mask(frame.object_pixels, k.width, k.height,
                      fdir / "mask.png", dilation)
        for pid, px in sorted(frame.part_pixels.items()):
            save_mask(px, k.width, k.height, fdir / f"mask_p{pid}.png", dilation)


def _bundle_to_indexed(bundle: ObservationBundle,
                       part_index: dict[str, int]) -> ObservationBundle:
    frames = []
    for f in bundle.frames:
        frames.append(FrameObservation(
            object_points=f.object_points,
            part_points={part_index[pid]: v for pid, v in f.part_points.items()},
            object_pixels=f.object_pixels,
            part_pixels={part_index[pid]: v for pid, v in f.part_pixels.items()},
        ))
    return ObservationBundle(frames, bundle.intrinsics)


def load_observations(root, frame_count: int, k: CameraIntrinsics,
                      index_to_part: dict[int, str]) -> ObservationBundle:
    root = Path(root)
    frames = []
    for i in range(frame_count):
        fdir = _frame_dir(root, i)
        if not fdir.is_dir():
            frames.append(FrameObservation())
            continue
        obj = None
        pobj = fdir / "points.ply"
        if pobj.exists():
            obj = np.asarray(load_ply_cloud(pobj).points)
        part_points = {}
        part_pixels = {}
        for ply in sorted(fdir.glob("points_p*.ply")):
            gi = int(ply.stem.split("_p")[1])
            part_points[index_to_part[gi]] = np.asarray(load_ply_cloud(ply).points)
        pixels = None
        pmask = fdir / "mask.png"
        if pmask.exists():
            pixels = mask_pixels(load_mask(pmask))
        for png in sorted(fdir.glob("mask_p*.png")):
            gi = int(png.stem.split("_p")[1])
            part_pixels[index_to_part[gi]] = mask_pixels(load_mask(png))
        frames.append(FrameObservation(object_points=obj, part_points=part_points,
                                       object_pixels=pixels, part_pixels=part_pixels))
    return ObservationBundle(frames, k)


# ---------------------------------------------------------------------------
# scene manifests

def save_scene(scene: Scene, root, dilation: int = 0) -> Path:
    """Write a scene directory and return the manifest path."""
    root = Path(root)
    (root / "objects").mkdir(parents=True, exist_ok=True)
    (root / "humans").mkdir(exist_ok=True)
    (root / "pag.json").write_text(serialize_pag(scene.graph))
    save_intrinsics(scene.intrinsics, root / "intrinsics.json")

    manifest = {
        "version": FORMAT_VERSION,
        "frame_count": scene.graph.frame_count,
        "pag": "pag.json",
        "intrinsics": "intrinsics.json",
        "objects": [],
        "humans": [],
        "observations": {},
    }
    for oid in scene.object_ids():
        save_ply_cloud(scene.objects[oid], root / "objects" / f"{oid}.ply")
        entry = {"id": oid, "cloud": f"objects/{oid}.ply"}
        if oid in scene.sdfs:
            save_sdf(scene.sdfs[oid], root / "objects" / f"{oid}.sdf")
            entry["sdf"] = f"objects/{oid}.sdf"
        manifest["objects"].append(entry)
        part_index = scene.part_indices(oid)
        save_observations(_bundle_to_indexed(scene.observations[oid], part_index),
                          root / "obs" / oid, dilation)
        manifest["observations"][oid] = f"obs/{oid}"
    for hid in scene.human_ids():
        save_human_motion(scene.humans[hid], root / "humans" / f"{hid}.json")
        manifest["humans"].append({"id": hid, "motion": f"humans/{hid}.json"})

    path = root / "scene.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_scene(manifest_path) -> Scene:
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    doc = json.loads(manifest_path.read_text())
    if doc.get("version") != FORMAT_VERSION:
        raise FormatError(f"unsupported scene manifest version {doc.get('version')!r}")
    graph = load_pag(root / doc["pag"])
    k = load_intrinsics(root / doc["intrinsics"])
    frame_count = int(doc["frame_count"])
    if frame_count != graph.frame_count:
        raise FormatError("manifest frame_count disagrees with the PAG")

    objects = {}
    sdfs = {}
    observations = {}
    part_nodes = list(graph.part_nodes)
    for entry in doc["objects"]:
        oid = entry["id"]
        objects[oid] = load_ply_cloud(root / entry["cloud"])
        if "sdf" in entry:
            sdfs[oid] = load_sdf(root / entry["sdf"])
        index_to_part = {i: p.id for i, p in enumerate(part_nodes) if p.owner == oid}
        obs_dir = doc["observations"].get(oid)
        if obs_dir is None:
            observations[oid] = ObservationBundle(
                [FrameObservation() for _ in range(frame_count)], k)
        else:
            observations[oid] = load_observations(root / obs_dir, frame_count, k,
                                                  index_to_part)
    humans = {}
    for entry in doc["humans"]:
        humans[entry["id"]] = load_human_motion(root / entry["motion"])
    return Scene(graph=graph, objects=objects, sdfs=sdfs,
                 observations=observations, humans=humans, intrinsics=k)

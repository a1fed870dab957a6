"""Brute-force reference evaluation of every loss term and metric.

Deliberately independent of the optimization code: plain scipy distance
matrices, scipy Rotation for everything rotational, explicit Python loops
over frames. Used as ground truth by tests; no subsampling, O(N*M)
everywhere.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist
from scipy.spatial.transform import Rotation, Slerp

from ..geom import PoseTrajectory
from ..hoiopt.data import Scene
from ..hoiopt.losses import LossBreakdown

DEPTH_CLAMP = 1e-6   # mirror of the projection depth clamp
ANTIPODAL_TOL = 1e-6


def _chamfer(a: np.ndarray, b: np.ndarray) -> float:
    d = cdist(a, b)
    return 0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean())


def _min_pair(a: np.ndarray, b: np.ndarray) -> float:
    return float(cdist(a, b).min())


def _softmin(d: np.ndarray, temp: float) -> float:
    d = d.reshape(-1)
    w = np.exp(-(d - d.min()) / temp)
    w /= w.sum()
    return float((w * d).sum())


def _project(points: np.ndarray, k) -> np.ndarray:
    z = np.maximum(points[:, 2], DEPTH_CLAMP)
    return np.stack([k.fx * points[:, 0] / z + k.cx,
                     k.fy * points[:, 1] / z + k.cy], axis=1)


def _trilinear(grid, points: np.ndarray) -> np.ndarray:
    dims = np.array(grid.values.shape)
    rel = (points - grid.origin) / grid.cell_size
    clamped = np.clip(rel, 0.0, dims - 1)
    outside = np.linalg.norm((rel - clamped) * grid.cell_size, axis=1)
    i0 = np.minimum(np.floor(clamped).astype(int), dims - 2)
    f = clamped - i0
    v = grid.values
    out = np.zeros(len(points))
    for corner in range(8):
        dx, dy, dz = corner & 1, (corner >> 1) & 1, (corner >> 2) & 1
        w = (np.where(dx, f[:, 0], 1 - f[:, 0])
             * np.where(dy, f[:, 1], 1 - f[:, 1])
             * np.where(dz, f[:, 2], 1 - f[:, 2]))
        out += w * v[i0[:, 0] + dx, i0[:, 1] + dy, i0[:, 2] + dz]
    return out + outside


def _geodesic(r1: np.ndarray, r2: np.ndarray) -> float:
    return float((Rotation.from_matrix(r1).inv() * Rotation.from_matrix(r2)).magnitude())


def _slerp_mid(r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    s = Slerp([0.0, 1.0], Rotation.from_matrix(np.stack([r1, r2])))
    return s(0.5).as_matrix()


def oracle_losses(scene: Scene, trajectories: dict[str, PoseTrajectory],
                  softmin_temp: float | None = None) -> LossBreakdown:
    """All loss terms for the given trajectories.

    ``softmin_temp`` switches the contact continuity term to the softmin
    surrogate used during optimization; the default is the exact minimum.
    """
    graph = scene.graph
    t_total = graph.frame_count
    k = scene.intrinsics
    part_global = {p.id: i for i, p in enumerate(graph.part_nodes)}

    def posed(oid: str, frame: int, pts: np.ndarray) -> np.ndarray:
        tr = trajectories[oid]
        return pts @ tr.rotations[frame].T + tr.translations[frame]

    fit_o3, fit_p3, fit_o2, fit_p2 = 0.0, 0.0, 0.0, 0.0
    for oid in scene.object_ids():
        cloud = scene.objects[oid]
        pts = np.asarray(cloud.points)
        bundle = scene.observations[oid]
        part_pts = {
            node.id: pts[cloud.labels == part_global[node.id]]
            for node in graph.parts_of(oid)
        }
        for f in range(t_total):
            obs = bundle.frames[f]
            world = posed(oid, f, pts)
            if obs.object_points is not None and len(obs.object_points):
                fit_o3 += _chamfer(world, obs.object_points)
            if obs.object_pixels is not None and len(obs.object_pixels):
                fit_o2 += _chamfer(_project(world, k), obs.object_pixels)
            for pid, canon in part_pts.items():
                if len(canon) == 0:
                    continue
                target = obs.part_points.get(pid)
                if target is not None and len(target):
                    fit_p3 += _chamfer(posed(oid, f, canon), target)
                target2 = obs.part_pixels.get(pid)
                if target2 is not None and len(target2):
                    fit_p2 += _chamfer(_project(posed(oid, f, canon), k), target2)

    cc, cd = 0.0, 0.0
    constraints = scene.constraints()
    for c in constraints.contacts:
        oid = c.first.owner_id
        cloud = scene.objects[oid]
        first_canon = np.asarray(cloud.points)[
            cloud.labels == part_global[c.first.part_id]]
        if c.second.owner_kind == "human":
            second_world = scene.humans[c.second.owner_id].parts[c.second.label]
        else:
            second_oid = c.second.owner_id
            sc = scene.objects[second_oid]
            canon2 = np.asarray(sc.points)[sc.labels == part_global[c.second.part_id]]
            second_world = np.stack([posed(second_oid, f, canon2)
                                     for f in range(t_total)])
        md = []
        canon_tracks = []
        tr = trajectories[oid]
        for f in range(t_total):
            first_world = posed(oid, f, first_canon)
            d = cdist(first_world, second_world[f])
            md.append(_softmin(d, softmin_temp) if softmin_temp else float(d.min()))
            canon_tracks.append(
                (second_world[f] - tr.translations[f]) @ tr.rotations[f])
        md = np.array(md)
        if c.continuous:
            cc += md.mean()
        elif softmin_temp:
            cc += _softmin(md, softmin_temp)
        else:
            cc += md.min()
        canon_tracks = np.stack(canon_tracks)
        if c.static_contact:
            for f in range(t_total - 1):
                cd += np.linalg.norm(canon_tracks[f] - canon_tracks[f + 1],
                                     axis=1).mean()
        else:
            for f in range(1, t_total - 1):
                mid = 0.5 * (canon_tracks[f - 1] + canon_tracks[f + 1])
                cd += np.linalg.norm(canon_tracks[f] - mid, axis=1).mean()

    pen = 0.0
    for oid in scene.object_ids():
        grid = scene.sdfs.get(oid)
        if grid is None:
            continue
        tr = trajectories[oid]
        for human in scene.humans.values():
            depths = []
            for f in range(t_total):
                canon = (human.body_vertices[f] - tr.translations[f]) @ tr.rotations[f]
                sd = _trilinear(grid, canon)
                depths.append(np.maximum(0.0, -sd).sum())
            pen += float(np.mean(depths))

    sr, st = 0.0, 0.0
    for m in constraints.motion_states:
        tr = trajectories[m.object_id]
        rot = tr.rotations
        tra = tr.translations
        if m.rotates:
            for f in range(1, t_total - 1):
                if _geodesic(rot[f - 1], rot[f + 1]) > np.pi - ANTIPODAL_TOL:
                    sr += _geodesic(rot[f], rot[f + 1])
                else:
                    sr += _geodesic(rot[f], _slerp_mid(rot[f - 1], rot[f + 1]))
        else:
            for f in range(t_total - 1):
                sr += _geodesic(rot[f], rot[f + 1])
        if m.translates:
            for f in range(1, t_total - 1):
                st += float(np.linalg.norm(
                    tra[f] - 0.5 * (tra[f - 1] + tra[f + 1])))
        else:
            for f in range(t_total - 1):
                st += float(np.linalg.norm(tra[f] - tra[f + 1]))

    return LossBreakdown(
        fit_object_3d=fit_o3, fit_part_3d=fit_p3,
        fit_object_2d=fit_o2, fit_part_2d=fit_p2,
        contact_continuity=cc, contact_dynamics=cd,
        penetration=pen,
        smooth_rotation=sr, smooth_translation=st,
    )


# ---------------------------------------------------------------------------
# metric oracles (mirrors of evalmetrics, loop-based)

def oracle_temporal_smoothness(joints: np.ndarray) -> float:
    """Mean midpoint deviation over interior frames and tracked points."""
    t = joints.shape[0]
    vals = []
    for f in range(1, t - 1):
        mid = 0.5 * (joints[f - 1] + joints[f + 1])
        vals.extend(np.linalg.norm(joints[f] - mid, axis=1))
    return float(np.mean(vals))


def oracle_motion_diversity(tracks: list[np.ndarray]) -> float:
    """Mean pairwise distance over sample pairs, frames, and points."""
    k = len(tracks)
    vals = []
    for a in range(k):
        for b in range(a + 1, k):
            vals.append(np.linalg.norm(tracks[a] - tracks[b], axis=2).mean())
    return float(np.mean(vals))


def oracle_plausibility(body_vertices: np.ndarray,
                        trajectories: dict[str, PoseTrajectory],
                        sdfs: dict, tolerance: float) -> tuple[float, float]:
    """(non_collision, contact) per the quoted frame/vertex ratios."""
    t, v, _ = body_vertices.shape
    ratios = []
    collision_frames = 0
    for f in range(t):
        colliding = np.zeros(v, dtype=bool)
        for oid, grid in sdfs.items():
            tr = trajectories[oid]
            canon = (body_vertices[f] - tr.translations[f]) @ tr.rotations[f]
            colliding |= _trilinear(grid, canon) < tolerance
        ratios.append(1.0 - colliding.mean())
        collision_frames += bool(colliding.any())
    return float(np.mean(ratios)), collision_frames / t

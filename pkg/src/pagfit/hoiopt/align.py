"""Per-frame similarity alignment of monocular point maps to recovered
human motion.

Monocular depth point maps are inconsistent across frames and live in an
arbitrary scale; this fits one positive-scale similarity transform per
frame so the human subset of each point map lands on the human motion, by
minimizing 3D plus projected-2D Chamfer losses. Frames without human
pixels are skipped and their transforms interpolated from the nearest
solved neighbors (linear in translation and log-scale, slerp in rotation).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..errors import EmptyCloudError, FrameCountMismatchError
from ..geom import CameraIntrinsics, slerp
from .data import HumanMotionSequence
from .losses import _chamfer_frames, _pad_frames, _TargetSet
from .torchgeom import matrix_to_rot6d, project, rot6d_to_matrix


@dataclass(frozen=True)
class SimilarityTransform:
    scale: float
    rotation: np.ndarray     # (3, 3)
    translation: np.ndarray  # (3,)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return self.scale * (pts @ self.rotation.T) + self.translation

    def to_dict(self) -> dict:
        return {
            "scale": float(self.scale),
            "rotation": [float(x) for x in self.rotation.reshape(9)],
            "translation": [float(x) for x in self.translation],
        }

    @staticmethod
    def from_dict(d: dict) -> "SimilarityTransform":
        return SimilarityTransform(
            float(d["scale"]),
            np.reshape(np.asarray(d["rotation"], dtype=np.float64), (3, 3)),
            np.asarray(d["translation"], dtype=np.float64),
        )


def _rms_spread(pts: np.ndarray) -> float:
    c = pts.mean(axis=0)
    return float(np.sqrt(((pts - c) ** 2).sum(axis=1).mean()))


def align_point_maps(point_maps: list[np.ndarray | None],
                     human_pixels: list[np.ndarray | None],
                     human_motion: HumanMotionSequence,
                     intrinsics: CameraIntrinsics,
                     steps: int = 300,
                     learning_rate: float = 0.02) -> list[SimilarityTransform]:
    """Solve one (scale, rotation, translation) per frame.

    ``point_maps[t]``: (N_t, 3) human point-map points for frame t, or
    None/empty when no human pixels were found. ``human_pixels[t]``:
    matching (N_t, 2) pixel coordinates used by the 2D term (may be None).
    Scale is parameterized as exp(log s), so it stays positive.
    """
    t_total = human_motion.frame_count
    if len(point_maps) != t_total:
        raise FrameCountMismatchError(
            f"{len(point_maps)} point maps for {t_total} motion frames")
    valid = [i for i in range(t_total)
             if point_maps[i] is not None and len(point_maps[i]) > 0]
    if not valid:
        raise EmptyCloudError("no frame has human point-map points")

    body = human_motion.body_vertices
    src_data, src_mask = _pad_frames([np.asarray(point_maps[i]) for i in valid], 3)
    body_tgt = _TargetSet([body[i] for i in valid], 3)
    pix_tgt = _TargetSet(
        [None if human_pixels[i] is None or len(human_pixels[i]) == 0
         else np.asarray(human_pixels[i]) for i in valid], 2)

    f = len(valid)
    init_scale = np.array([
        _rms_spread(body[i]) / max(_rms_spread(np.asarray(point_maps[i])), 1e-9)
        for i in valid
    ])
    init_trans = np.array([
        body[i].mean(axis=0) - init_scale[k] * np.asarray(point_maps[i]).mean(axis=0)
        for k, i in enumerate(valid)
    ])
    log_s = torch.tensor(np.log(init_scale), dtype=torch.float64, requires_grad=True)
    rot6 = matrix_to_rot6d(torch.eye(3, dtype=torch.float64).expand(f, 3, 3)) \
        .clone().requires_grad_(True)
    trans = torch.tensor(init_trans, dtype=torch.float64, requires_grad=True)

    k = intrinsics
    opt = torch.optim.Adam([log_s, rot6, trans], lr=learning_rate)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(
        opt, T_max=steps, eta_min=learning_rate * 0.01)
    for _ in range(steps):
        opt.zero_grad(set_to_none=True)
        rot = rot6d_to_matrix(rot6)
        moved = (torch.exp(log_s)[:, None, None]
                 * torch.einsum("tij,tnj->tni", rot, src_data)
                 + trans.unsqueeze(1))
        loss = _chamfer_frames(moved, body_tgt, exact=False, src_mask=src_mask)
        if not pix_tgt.empty:
            projected = project(moved, k.fx, k.fy, k.cx, k.cy)
            loss = loss + _chamfer_frames(projected, pix_tgt, exact=False,
                                          src_mask=src_mask)
        loss.backward()
        opt.step()
        sched.step()

    with torch.no_grad():
        scales = torch.exp(log_s).numpy()
        rots = rot6d_to_matrix(rot6).numpy()
        trs = trans.numpy()

    solved = {
        i: SimilarityTransform(float(scales[k]), rots[k].copy(), trs[k].copy())
        for k, i in enumerate(valid)
    }
    return _fill_gaps(solved, t_total)


def _fill_gaps(solved: dict[int, SimilarityTransform],
               t_total: int) -> list[SimilarityTransform]:
    """Interpolate transforms for frames that were skipped."""
    idx = sorted(solved)
    out: list[SimilarityTransform] = []
    for i in range(t_total):
        if i in solved:
            out.append(solved[i])
            continue
        prev = max((j for j in idx if j < i), default=None)
        nxt = min((j for j in idx if j > i), default=None)
        if prev is None:
            out.append(solved[nxt])
        elif nxt is None:
            out.append(solved[prev])
        else:
            a = solved[prev]
            b = solved[nxt]
            alpha = (i - prev) / (nxt - prev)
            out.append(SimilarityTransform(
                float(np.exp((1 - alpha) * np.log(a.scale)
                             + alpha * np.log(b.scale))),
                slerp(a.rotation, b.rotation, alpha),
                (1 - alpha) * a.translation + alpha * b.translation,
            ))
    return out

"""Loss terms of the trajectory optimization.

The evaluator precomputes padded per-frame target tensors once, then every
step computes:

  fit        object- and part-level Chamfer terms in 3D and projected 2D
  contact    per-edge continuity (min-pair distance) and dynamics
             (canonical-frame relative motion) terms
  penetration  clamped SDF depth of human body vertices inside objects
  smooth     rotational and translational regularizers driven by the
             per-object motion flags

Two evaluation modes share the code path:

  exact=False  (optimization) nearest-neighbor assignments are found on a
      detached float32 distance matrix, distances re-derived from matched
      pairs in float64 with guarded norms so gradients are finite; hard
      minima are replaced by softmin with a configurable temperature.
  exact=True   (reporting) plain float64 distance matrices, hard minima,
      no gradient. This is the mode compared against the brute-force
      oracle and written to loss reports.
"""
from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np
import torch

from ..errors import FrameCountMismatchError, TooFewFramesError
from ..geom import PoseTrajectory
from .data import LossWeights, ObservationBundle, Scene
from .torchgeom import (
    SdfTensor,
    geodesic,
    matrix_to_rot6d,
    project,
    rot6d_to_matrix,
    safe_norm,
    slerp_midpoint,
)

DEFAULT_SOFTMIN_TEMP = 0.01  # meters; softmin sharpness for contact terms
ANTIPODAL_TOL = 1e-6


def _t64(arr) -> torch.Tensor:
    """Copying float64 tensor from possibly read-only numpy data."""
    return torch.tensor(np.array(arr, dtype=np.float64))


@dataclass(frozen=True)
class TrajectoryParams:
    """Optimization variables for one object: per-frame 6D rotation
    parameters and translations. Decoding always yields proper rotations."""
    rot6: torch.Tensor   # (T, 6)
    trans: torch.Tensor  # (T, 3)

    @property
    def frame_count(self) -> int:
        return self.rot6.shape[0]

    def rotations(self) -> torch.Tensor:
        return rot6d_to_matrix(self.rot6)

    def tensors(self) -> list[torch.Tensor]:
        return [self.rot6, self.trans]

    @staticmethod
    def from_trajectory(traj: PoseTrajectory, requires_grad: bool = True) -> "TrajectoryParams":
        rot = _t64(traj.rotations)
        rot6 = matrix_to_rot6d(rot).clone().requires_grad_(requires_grad)
        trans = _t64(traj.translations).requires_grad_(requires_grad)
        return TrajectoryParams(rot6, trans)

    def to_trajectory(self) -> PoseTrajectory:
        with torch.no_grad():
            rot = rot6d_to_matrix(self.rot6).numpy()
            return PoseTrajectory(rot, self.trans.detach().numpy().copy())


@dataclass(frozen=True)
class LossBreakdown:
    fit_object_3d: float = 0.0
    fit_part_3d: float = 0.0
    fit_object_2d: float = 0.0
    fit_part_2d: float = 0.0
    contact_continuity: float = 0.0
    contact_dynamics: float = 0.0
    penetration: float = 0.0
    smooth_rotation: float = 0.0
    smooth_translation: float = 0.0

    @property
    def fit(self) -> float:
        return (self.fit_object_3d + self.fit_part_3d
                + self.fit_object_2d + self.fit_part_2d)

    @property
    def contact(self) -> float:
        return self.contact_continuity + self.contact_dynamics

    @property
    def smooth(self) -> float:
        return self.smooth_rotation + self.smooth_translation

    def total(self, w: LossWeights) -> float:
        return (w.fit * self.fit + w.contact * self.contact
                + w.penetration * self.penetration + w.smooth * self.smooth)

    def to_dict(self) -> dict:
        return {
            "fit_object_3d": self.fit_object_3d,
            "fit_part_3d": self.fit_part_3d,
            "fit_object_2d": self.fit_object_2d,
            "fit_part_2d": self.fit_part_2d,
            "contact_continuity": self.contact_continuity,
            "contact_dynamics": self.contact_dynamics,
            "penetration": self.penetration,
            "smooth_rotation": self.smooth_rotation,
            "smooth_translation": self.smooth_translation,
            "fit": self.fit,
            "contact": self.contact,
            "smooth": self.smooth,
        }


def _pad_frames(arrays: list[np.ndarray | None], width: int):
    """Stack variable-length per-frame arrays into (T, M, width) + mask."""
    t = len(arrays)
    m = max((0 if a is None else len(a)) for a in arrays)
    if m == 0:
        return None, None
    data = np.zeros((t, m, width), dtype=np.float64)
    mask = np.zeros((t, m), dtype=bool)
    for i, a in enumerate(arrays):
        if a is None or len(a) == 0:
            continue
        data[i, :len(a)] = a
        mask[i, :len(a)] = True
    return (torch.as_tensor(data, dtype=torch.float64),
            torch.as_tensor(mask))


def _subsample(arr: np.ndarray | None, cap: int | None,
               rng: np.random.Generator | None) -> np.ndarray | None:
    if arr is None or cap is None or len(arr) <= cap:
        return arr
    idx = np.sort(rng.choice(len(arr), size=cap, replace=False))
    return arr[idx]


class _TargetSet:
    """Padded per-frame Chamfer targets in f64 (values) and f32 (argmin)."""

    def __init__(self, arrays: list[np.ndarray | None], width: int):
        self.data, self.mask = _pad_frames(arrays, width)
        if self.data is not None:
            self.data32 = self.data.float()
            self.counts = self.mask.sum(dim=1)
            self.any = self.mask.any(dim=1)
            # frames either completely full or completely empty: padding can
            # never win an argmin inside a valid frame, so masking is skipped
            self.simple = bool((self.mask.all(dim=1) | ~self.any).all())

    @property
    def empty(self) -> bool:
        return self.data is None


def _chamfer_frames(src: torch.Tensor, tgt: _TargetSet, exact: bool,
                    src_mask: torch.Tensor | None = None,
                    precise_argmin: bool = False) -> torch.Tensor:
    """Summed-over-frames symmetric Chamfer between a (T, N, D) source and
    padded targets. Frames without targets contribute zero; ``src_mask``
    marks valid source rows when the source itself is padded.

    The exact path avoids cdist's matrix-multiply expansion, which loses
    ~sqrt(eps)*|x| of precision near zero distances. ``precise_argmin``
    finds assignments on the same exact float64 distances (used by
    gradient checks); the default float32 search is faster and only
    matters when competing neighbors are closer than ~1e-3.
    """
    t, n, width = src.shape
    m = tgt.data.shape[1]
    if exact:
        with torch.no_grad():
            d = torch.cdist(src, tgt.data,
                            compute_mode="donot_use_mm_for_euclid_dist")
            inf = d.new_tensor(float("inf"))
            if not tgt.simple:
                d = torch.where(tgt.mask.unsqueeze(1), d, inf)
            if src_mask is not None:
                d = torch.where(src_mask.unsqueeze(2), d, inf)
                src_counts = src_mask.sum(dim=1).clamp_min(1)
                mins = d.min(dim=2).values
                mean_ab = torch.where(src_mask, mins, torch.zeros_like(mins)).sum(dim=1) \
                    / src_counts
            else:
                mean_ab = d.min(dim=2).values.mean(dim=1)
            min_ba = d.min(dim=1).values
            mean_ba = torch.where(tgt.mask, min_ba, torch.zeros_like(min_ba)).sum(dim=1) \
                / tgt.counts.clamp_min(1)
            cd = 0.5 * (mean_ab + mean_ba)
            valid = tgt.any if src_mask is None else tgt.any & src_mask.any(dim=1)
            return torch.where(valid, cd, torch.zeros_like(cd)).sum()
    with torch.no_grad():
        if precise_argmin:
            d32 = torch.cdist(src.detach(), tgt.data,
                              compute_mode="donot_use_mm_for_euclid_dist")
        else:
            d32 = torch.cdist(src.detach().float(), tgt.data32)
        if not tgt.simple:
            d32 = torch.where(tgt.mask.unsqueeze(1), d32,
                              torch.tensor(float("inf"), dtype=d32.dtype))
        if src_mask is not None:
            d32 = torch.where(src_mask.unsqueeze(2), d32,
                              torch.tensor(float("inf"), dtype=d32.dtype))
        idx_ab = d32.min(dim=2).indices     # (T, N)
        idx_ba = d32.min(dim=1).indices     # (T, M)
    matched_ab = tgt.data.gather(1, idx_ab.unsqueeze(-1).expand(t, n, width))
    d_ab = safe_norm(src - matched_ab)      # (T, N)
    matched_ba = src.gather(1, idx_ba.unsqueeze(-1).expand(t, m, width))
    d_ba = safe_norm(matched_ba - tgt.data)  # (T, M)
    if src_mask is not None:
        mean_ab = (d_ab * src_mask).sum(dim=1) / src_mask.sum(dim=1).clamp_min(1)
        valid = tgt.any & src_mask.any(dim=1)
    else:
        mean_ab = d_ab.mean(dim=1)
        valid = tgt.any
    mean_ba = (d_ba * tgt.mask).sum(dim=1) / tgt.counts.clamp_min(1)
    cd = 0.5 * (mean_ab + mean_ba)
    return (cd * valid).sum()


def _pairwise(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Guarded pairwise distances, shapes (T, N, 3) x (T, M, 3) -> (T, N, M)."""
    return safe_norm(a.unsqueeze(2) - b.unsqueeze(1))


def _softmin(d: torch.Tensor, temp: float) -> torch.Tensor:
    """Softmin over the last dimension: sum(softmax(-d/temp) * d)."""
    w = torch.softmax(-d / temp, dim=-1)
    return (w * d).sum(dim=-1)


def smooth_rotation_term(rotations: torch.Tensor, rotates: bool,
                         exact: bool) -> torch.Tensor:
    """Motion-flag-driven rotational smoothness for one object.

    rotates=True: geodesic distance of each interior frame to the slerp
    midpoint of its neighbors; neighbor pairs a half-turn apart fall back
    to the consecutive-difference penalty for that frame. rotates=False:
    consecutive geodesic differences.
    """
    t = rotations.shape[0]
    if t < 2 or (rotates and t < 3):
        raise TooFewFramesError(
            f"rotation smoothness needs at least {'3' if rotates else '2'} frames, got {t}"
        )
    if not rotates:
        return geodesic(rotations[:-1], rotations[1:], exact=exact).sum()
    prev, cur, nxt = rotations[:-2], rotations[1:-1], rotations[2:]
    with torch.no_grad():
        span = geodesic(prev, nxt, exact=True)
        antipodal = span > (np.pi - ANTIPODAL_TOL)
    mid = slerp_midpoint(prev, nxt)
    term_mid = geodesic(cur, mid, exact=exact)
    term_fallback = geodesic(cur, nxt, exact=exact)
    return torch.where(antipodal, term_fallback, term_mid).sum()


def smooth_translation_term(trans: torch.Tensor, translates: bool,
                            exact: bool) -> torch.Tensor:
    t = trans.shape[0]
    if t < 2 or (translates and t < 3):
        raise TooFewFramesError(
            f"translation smoothness needs at least {'3' if translates else '2'} frames, got {t}"
        )
    norm = torch.linalg.vector_norm if exact else None
    if translates:
        resid = trans[1:-1] - 0.5 * (trans[:-2] + trans[2:])
    else:
        resid = trans[:-1] - trans[1:]
    d = norm(resid, dim=-1) if exact else safe_norm(resid)
    return d.sum()


class LossEvaluator:
    """Evaluates all loss terms for a validated scene.

    Construction snapshots (and optionally subsamples) the observation and
    canonical geometry into padded tensors; ``subsample`` caps the number
    of points/pixels per Chamfer cloud per frame and is resampled per
    restart through ``rng``. Contact and penetration geometry is never
    subsampled.
    """

    def __init__(self, scene: Scene, softmin_temp: float = DEFAULT_SOFTMIN_TEMP,
                 subsample: int | None = None,
                 rng: np.random.Generator | None = None,
                 precise_argmin: bool = False):
        if subsample is not None and rng is None:
            rng = np.random.default_rng(0)
        self.scene = scene
        self.temp = softmin_temp
        self.precise_argmin = precise_argmin
        self.frame_count = scene.graph.frame_count
        self.object_ids = scene.object_ids()
        self.human_ids = scene.human_ids()
        self.constraints = scene.constraints()
        k = scene.intrinsics
        self._k = (k.fx, k.fy, k.cx, k.cy)

        self._src3d: dict[str, torch.Tensor] = {}
        self._src_parts: dict[str, dict[str, torch.Tensor]] = {}
        self._tgt3d: dict[str, _TargetSet] = {}
        self._tgt_parts: dict[str, dict[str, _TargetSet]] = {}
        self._pix: dict[str, _TargetSet] = {}
        self._pix_parts: dict[str, dict[str, _TargetSet]] = {}
        for oid in self.object_ids:
            self._prepare_object(oid, scene.observations[oid], subsample, rng)

        # contact geometry: canonical object part clouds and human part tracks
        self._contact_first: list[torch.Tensor] = []
        self._contact_second: list[tuple] = []
        part_index = {p.id: i for i, p in enumerate(scene.graph.part_nodes)}
        for c in self.constraints.contacts:
            src_pts = scene.objects[c.first.owner_id].part(part_index[c.first.part_id]).points
            self._contact_first.append(_t64(src_pts))
            if c.second.owner_kind == "human":
                track = scene.humans[c.second.owner_id].parts[c.second.label]
                self._contact_second.append(("human", _t64(track)))
            else:
                pts = scene.objects[c.second.owner_id].part(
                    part_index[c.second.part_id]).points
                self._contact_second.append(
                    ("object", c.second.owner_id, _t64(pts)))

        self._sdfs = {oid: SdfTensor.from_grid(scene.sdfs[oid])
                      for oid in self.object_ids if oid in scene.sdfs}
        self._body_vertices = {
            hid: _t64(scene.humans[hid].body_vertices) for hid in self.human_ids
        }

    # -- construction helpers ------------------------------------------------

    def _prepare_object(self, oid: str, bundle: ObservationBundle,
                        cap: int | None, rng):
        if bundle.frame_count != self.frame_count:
            raise FrameCountMismatchError(
                f"bundle for {oid!r}: {bundle.frame_count} frames != {self.frame_count}"
            )
        scene = self.scene
        cloud = scene.objects[oid]
        part_idx = scene.part_indices(oid)

        src = _subsample(np.asarray(cloud.points), cap, rng)
        self._src3d[oid] = _t64(src)
        self._src_parts[oid] = {}
        observed_parts = set()
        for f in bundle.frames:
            observed_parts.update(f.part_points.keys())
            observed_parts.update(f.part_pixels.keys())
        for pid, gi in part_idx.items():
            if pid not in observed_parts:
                continue
            pts = cloud.part(gi).points
            if len(pts) == 0:
                continue
            pts = _subsample(np.asarray(pts), cap, rng)
            self._src_parts[oid][pid] = _t64(pts)

        frames = bundle.frames
        self._tgt3d[oid] = _TargetSet(
            [_subsample(f.object_points, cap, rng) for f in frames], 3)
        self._pix[oid] = _TargetSet(
            [_subsample(f.object_pixels, cap, rng) for f in frames], 2)
        self._tgt_parts[oid] = {}
        self._pix_parts[oid] = {}
        for pid in self._src_parts[oid]:
            self._tgt_parts[oid][pid] = _TargetSet(
                [_subsample(f.part_points.get(pid), cap, rng) for f in frames], 3)
            self._pix_parts[oid][pid] = _TargetSet(
                [_subsample(f.part_pixels.get(pid), cap, rng) for f in frames], 2)

    # -- posing helpers ------------------------------------------------------

    @staticmethod
    def _pose_points(params: TrajectoryParams, points: torch.Tensor,
                     rotations: torch.Tensor | None = None) -> torch.Tensor:
        """Apply per-frame poses to canonical (N, 3) points -> (T, N, 3)."""
        rot = params.rotations() if rotations is None else rotations
        return torch.einsum("tij,nj->tni", rot, points) + params.trans.unsqueeze(1)

    def _project(self, points: torch.Tensor) -> torch.Tensor:
        fx, fy, cx, cy = self._k
        return project(points, fx, fy, cx, cy)

    # -- loss terms ----------------------------------------------------------

    def fit_terms(self, params: dict[str, TrajectoryParams],
                  exact: bool = False) -> dict[str, torch.Tensor]:
        self._check_params(params)
        with torch.no_grad() if exact else contextlib.nullcontext():
            return self._fit_terms(params, exact)

    def _fit_terms(self, params, exact):
        zero = torch.zeros((), dtype=torch.float64)
        obj3d = zero.clone()
        part3d = zero.clone()
        obj2d = zero.clone()
        part2d = zero.clone()
        pa = self.precise_argmin
        for oid in self.object_ids:
            p = params[oid]
            rot = p.rotations()
            posed = self._pose_points(p, self._src3d[oid], rot)
            if not self._tgt3d[oid].empty:
                obj3d = obj3d + _chamfer_frames(posed, self._tgt3d[oid], exact,
                                                precise_argmin=pa)
            if not self._pix[oid].empty:
                obj2d = obj2d + _chamfer_frames(self._project(posed),
                                                self._pix[oid], exact,
                                                precise_argmin=pa)
            for pid, src in self._src_parts[oid].items():
                posed_p = self._pose_points(p, src, rot)
                tgt = self._tgt_parts[oid][pid]
                if not tgt.empty:
                    part3d = part3d + _chamfer_frames(posed_p, tgt, exact,
                                                      precise_argmin=pa)
                pix = self._pix_parts[oid][pid]
                if not pix.empty:
                    part2d = part2d + _chamfer_frames(self._project(posed_p),
                                                      pix, exact,
                                                      precise_argmin=pa)
        return {"fit_object_3d": obj3d, "fit_part_3d": part3d,
                "fit_object_2d": obj2d, "fit_part_2d": part2d}

    def contact_terms(self, params: dict[str, TrajectoryParams],
                      exact: bool = False) -> dict[str, torch.Tensor]:
        self._check_params(params)
        with torch.no_grad() if exact else contextlib.nullcontext():
            return self._contact_terms(params, exact)

    def _contact_terms(self, params, exact):
        zero = torch.zeros((), dtype=torch.float64)
        cc = zero.clone()
        cd = zero.clone()
        rotations = {oid: params[oid].rotations() for oid in self.object_ids}
        t = self.frame_count
        for i, c in enumerate(self.constraints.contacts):
            first_owner = c.first.owner_id
            p1 = params[first_owner]
            rot1 = rotations[first_owner]
            first_world = self._pose_points(p1, self._contact_first[i], rot1)
            second = self._contact_second[i]
            if second[0] == "human":
                second_world = second[1]
            else:
                _, owner, pts = second
                second_world = self._pose_points(params[owner], pts, rotations[owner])

            # continuity: min pair distance, averaged or minimized over frames
            d = _pairwise(first_world, second_world).reshape(t, -1)
            if exact:
                md = d.min(dim=1).values
                cc = cc + (md.mean() if c.continuous else md.min())
            else:
                md = _softmin(d, self.temp)
                cc = cc + (md.mean() if c.continuous else _softmin(md, self.temp))

            # dynamics: second node's cloud in the first object's canonical frame
            canon = torch.einsum(
                "tji,tnj->tni", rot1, second_world - p1.trans.unsqueeze(1))
            if c.static_contact:
                resid = canon[:-1] - canon[1:]
            else:
                if t < 3:
                    raise TooFewFramesError(
                        "dynamic contact needs at least 3 frames")
                resid = canon[1:-1] - 0.5 * (canon[:-2] + canon[2:])
            dn = torch.linalg.vector_norm(resid, dim=-1) if exact else safe_norm(resid)
            cd = cd + dn.mean(dim=1).sum()
        return {"contact_continuity": cc, "contact_dynamics": cd}

    def penetration_term(self, params: dict[str, TrajectoryParams],
                         exact: bool = False) -> torch.Tensor:
        self._check_params(params)
        with torch.no_grad() if exact else contextlib.nullcontext():
            return self._penetration_term(params)

    def _penetration_term(self, params):
        total = torch.zeros((), dtype=torch.float64)
        for oid in self.object_ids:
            sdf = self._sdfs.get(oid)
            if sdf is None:
                continue
            p = params[oid]
            rot = p.rotations()
            for verts in self._body_vertices.values():
                canon = torch.einsum("tji,tnj->tni", rot,
                                     verts - p.trans.unsqueeze(1))
                depth = torch.relu(-sdf.query(canon))
                total = total + depth.sum(dim=1).mean()
        return total

    def smooth_terms(self, params: dict[str, TrajectoryParams],
                     exact: bool = False) -> dict[str, torch.Tensor]:
        self._check_params(params)
        with torch.no_grad() if exact else contextlib.nullcontext():
            return self._smooth_terms(params, exact)

    def _smooth_terms(self, params, exact):
        rot_term = torch.zeros((), dtype=torch.float64)
        tra_term = torch.zeros((), dtype=torch.float64)
        for m in self.constraints.motion_states:
            p = params[m.object_id]
            rot_term = rot_term + smooth_rotation_term(p.rotations(), m.rotates, exact)
            tra_term = tra_term + smooth_translation_term(p.trans, m.translates, exact)
        return {"smooth_rotation": rot_term, "smooth_translation": tra_term}

    # -- top level -----------------------------------------------------------

    def evaluate(self, params: dict[str, TrajectoryParams],
                 weights: LossWeights, exact: bool = False):
        """Weighted total (tensor) plus the per-term tensor dict."""
        terms = {}
        terms.update(self.fit_terms(params, exact))
        terms.update(self.contact_terms(params, exact))
        terms["penetration"] = self.penetration_term(params, exact)
        terms.update(self.smooth_terms(params, exact))
        fit = (terms["fit_object_3d"] + terms["fit_part_3d"]
               + terms["fit_object_2d"] + terms["fit_part_2d"])
        contact = terms["contact_continuity"] + terms["contact_dynamics"]
        smooth = terms["smooth_rotation"] + terms["smooth_translation"]
        total = (weights.fit * fit + weights.contact * contact
                 + weights.penetration * terms["penetration"]
                 + weights.smooth * smooth)
        return total, terms

    def breakdown(self, params: dict[str, TrajectoryParams],
                  exact: bool = True) -> LossBreakdown:
        """Float snapshot of all terms (no gradients)."""
        with torch.no_grad():
            _, terms = self.evaluate(params, LossWeights(), exact=exact)
        return LossBreakdown(**{k: float(v) for k, v in terms.items()})

    def _check_params(self, params: dict[str, TrajectoryParams]):
        for oid in self.object_ids:
            if oid not in params:
                raise KeyError(f"no trajectory parameters for object {oid!r}")
            if params[oid].frame_count != self.frame_count:
                raise FrameCountMismatchError(
                    f"params for {oid!r} have {params[oid].frame_count} frames, "
                    f"scene has {self.frame_count}"
                )

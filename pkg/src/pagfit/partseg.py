"""Lifts per-view 2D part masks onto a 3D cloud by visibility-aware voting.

Each point is splatted into every view's z-buffer; where it is visible and
lands inside a part's mask, it collects one vote for that part. The final
label is the argmax of the votes, ties broken by the declared part order.
Points seen in no view inherit the label of their nearest labeled
neighbor, so every output point carries exactly one label.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyCloudError, NoViewsError
from .geom import CameraIntrinsics, PointCloud, RigidPose

# visibility slack as a fraction of the cloud's bounding-box diagonal
VISIBILITY_TOLERANCE = 0.01


@dataclass(frozen=True)
class ViewObservation:
    """One rendered view: camera intrinsics, a world-to-camera pose, and a
    binary mask per part label (all masks share the image dimensions)."""

    intrinsics: CameraIntrinsics
    camera_pose: RigidPose
    masks: dict[str, np.ndarray]  # part label -> (H, W) boolean

    def __post_init__(self):
        shape = (self.intrinsics.height, self.intrinsics.width)
        for label, mask in self.masks.items():
            m = np.asarray(mask, dtype=bool)
            if m.shape != shape:
                raise ValueError(
                    f"mask {label!r} has shape {m.shape}, expected {shape}"
                )
            self.masks[label] = m


def _splat(cloud: PointCloud, view: ViewObservation):
    """Pixel indices (row, col), camera depths, and an in-image mask."""
    cam = view.camera_pose.transform(cloud.points)
    z = cam[:, 2]
    k = view.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u = k.fx * cam[:, 0] / z + k.cx
        v = k.fy * cam[:, 1] / z + k.cy
    col = np.floor(u).astype(np.int64)
    row = np.floor(v).astype(np.int64)
    ok = (z > 0) & (col >= 0) & (col < k.width) & (row >= 0) & (row < k.height)
    return row, col, z, ok


def visibility_mask(cloud: PointCloud, view: ViewObservation,
                    tolerance: float | None = None) -> np.ndarray:
    """Per-point visibility under a point-splat z-buffer at mask resolution.

    A point is visible iff it is in front of the camera, lands inside the
    image, and its depth is within ``tolerance`` of the nearest splatted
    depth at its pixel. The default tolerance is 1% of the cloud's
    bounding-box diagonal.
    """
    if cloud.is_empty:
        raise EmptyCloudError("visibility of an empty cloud")
    if tolerance is None:
        lo, hi = cloud.bounding_box()
        tolerance = VISIBILITY_TOLERANCE * float(np.linalg.norm(hi - lo))
    row, col, z, ok = _splat(cloud, view)
    k = view.intrinsics
    zbuf = np.full(k.height * k.width, np.inf)
    flat = row[ok] * k.width + col[ok]
    np.minimum.at(zbuf, flat, z[ok])
    visible = np.zeros(len(cloud), dtype=bool)
    visible[ok] = z[ok] <= zbuf[flat] + tolerance
    return visible


def vote_labels(cloud: PointCloud, views: list[ViewObservation],
                parts: list[str], tolerance: float | None = None) -> PointCloud:
    """Label every point of ``cloud`` with an index into ``parts``.

    Votes are accumulated per view from visible points only; view order
    does not affect the result. Zero-vote points take the label of their
    nearest labeled neighbor in 3D.
    """
    if cloud.is_empty:
        raise EmptyCloudError("voting over an empty cloud")
    votes = vote_tally(cloud, views, parts, tolerance)
    has_votes = votes.sum(axis=1) > 0
    # argmax returns the smallest index among ties, which is exactly the
    # declared-order tie break
    labels = np.argmax(votes, axis=1).astype(np.int64)

    if not np.any(has_votes):
        raise NoViewsError("no point received a vote in any view")
    if not np.all(has_votes):
        tree = cKDTree(cloud.points[has_votes])
        _, nearest = tree.query(cloud.points[~has_votes], k=1)
        labels[~has_votes] = labels[has_votes][nearest]

    return PointCloud(cloud.points, labels)


def load_views_manifest(path) -> list[ViewObservation]:
    """Read a views manifest JSON.

    Format::

        {"version": 1,
         "views": [{"intrinsics": {fx, fy, cx, cy, width, height},
                    "pose": {"rotation": [9 row-major], "translation": [3]},
                    "masks": {"<part label>": "relative/path.png"}}, ...]}

    The pose maps world coordinates into the view's camera frame. Masks
    are PNG files where nonzero means inside.
    """
    import json
    from pathlib import Path

    from PIL import Image

    path = Path(path)
    doc = json.loads(path.read_text())
    views = []
    for entry in doc["views"]:
        k = CameraIntrinsics.from_dict(entry["intrinsics"])
        pose = RigidPose(
            np.reshape(np.asarray(entry["pose"]["rotation"], dtype=np.float64), (3, 3)),
            np.asarray(entry["pose"]["translation"], dtype=np.float64),
        )
        masks = {
            label: np.asarray(Image.open(path.parent / rel).convert("L")) > 0
            for label, rel in entry["masks"].items()
        }
        views.append(ViewObservation(k, pose, masks))
    return views


def vote_tally(cloud: PointCloud, views: list[ViewObservation],
               parts: list[str], tolerance: float | None = None) -> np.ndarray:
    """Raw per-point vote counts, shape (N, len(parts))."""
    if not views:
        raise NoViewsError("voting requires at least one view")
    n = len(cloud)
    votes = np.zeros((n, len(parts)), dtype=np.int64)
    for view in views:
        visible = visibility_mask(cloud, view, tolerance)
        row, col, _, ok = _splat(cloud, view)
        castable = visible & ok
        for pi, label in enumerate(parts):
            mask = view.masks.get(label)
            if mask is None:
                continue
            hit = np.zeros(n, dtype=bool)
            hit[castable] = mask[row[castable], col[castable]]
            votes[:, pi] += hit
    return votes

"""Analytic solid primitives used to build synthetic objects.

Each primitive knows its exact signed distance and can sample its surface
with a fixed point count, so synthetic scenes get exact SDFs and exactly
reproducible clouds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PartPrimitive:
    """One named part: a box, sphere, or cylinder in the object's canonical
    frame. ``size`` is (sx, sy, sz) for boxes, (radius,) for spheres, and
    (radius, height) for y-axis cylinders."""

    label: str
    shape: str  # "box" | "sphere" | "cylinder"
    size: tuple
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.shape not in ("box", "sphere", "cylinder"):
            raise ValueError(f"unknown primitive shape {self.shape!r}")

    def sdf(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64) - np.asarray(self.center)
        if self.shape == "sphere":
            (r,) = self.size
            return np.linalg.norm(p, axis=1) - r
        if self.shape == "box":
            h = np.asarray(self.size, dtype=np.float64) / 2.0
            q = np.abs(p) - h
            outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
            inside = np.minimum(q.max(axis=1), 0.0)
            return outside + inside
        r, height = self.size
        radial = np.linalg.norm(p[:, [0, 2]], axis=1) - r
        axial = np.abs(p[:, 1]) - height / 2.0
        d = np.stack([radial, axial], axis=1)
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=1)
        inside = np.minimum(d.max(axis=1), 0.0)
        return outside + inside

    def sample_surface(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.shape == "sphere":
            (r,) = self.size
            v = rng.normal(size=(n, 3))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            pts = v * r
        elif self.shape == "box":
            sx, sy, sz = self.size
            areas = np.array([sy * sz, sy * sz, sx * sz, sx * sz, sx * sy, sx * sy])
            face = rng.choice(6, size=n, p=areas / areas.sum())
            u = rng.uniform(-0.5, 0.5, size=n)
            v = rng.uniform(-0.5, 0.5, size=n)
            pts = np.zeros((n, 3))
            half = np.array([sx, sy, sz]) / 2.0
            axis = face // 2
            sign = np.where(face % 2 == 0, 1.0, -1.0)
            others = np.array([[1, 2], [0, 2], [0, 1]])
            for a in range(3):
                sel = axis == a
                pts[sel, a] = sign[sel] * half[a]
                o1, o2 = others[a]
                pts[sel, o1] = u[sel] * (2 * half[o1])
                pts[sel, o2] = v[sel] * (2 * half[o2])
        else:
            r, height = self.size
            lateral = 2 * np.pi * r * height
            caps = 2 * np.pi * r * r
            on_side = rng.random(n) < lateral / (lateral + caps)
            ang = rng.uniform(0, 2 * np.pi, size=n)
            pts = np.zeros((n, 3))
            y = rng.uniform(-height / 2, height / 2, size=n)
            pts[on_side] = np.stack([
                r * np.cos(ang[on_side]), y[on_side], r * np.sin(ang[on_side])
            ], axis=1)
            ncap = int((~on_side).sum())
            rad = r * np.sqrt(rng.random(ncap))
            top = rng.random(ncap) < 0.5
            cap_y = np.where(top, height / 2, -height / 2)
            pts[~on_side] = np.stack([
                rad * np.cos(ang[~on_side]), cap_y, rad * np.sin(ang[~on_side])
            ], axis=1)
        return pts + np.asarray(self.center)

    def to_dict(self) -> dict:
        return {"label": self.label, "shape": self.shape,
                "size": list(self.size), "center": list(self.center)}

    @staticmethod
    def from_dict(d: dict) -> "PartPrimitive":
        return PartPrimitive(d["label"], d["shape"], tuple(d["size"]),
                             tuple(d.get("center", (0.0, 0.0, 0.0))))


@dataclass(frozen=True)
class ObjectModel:
    """A composite of named part primitives in a shared canonical frame."""

    parts: tuple[PartPrimitive, ...]

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        labels = [p.label for p in self.parts]
        if len(set(labels)) != len(labels):
            raise ValueError("part labels must be unique within an object")

    def sdf(self, points: np.ndarray) -> np.ndarray:
        return np.min(np.stack([p.sdf(points) for p in self.parts]), axis=0)

    def sample_parts(self, n_per_part: int,
                     rng: np.random.Generator) -> dict[str, np.ndarray]:
        return {p.label: p.sample_surface(n_per_part, rng) for p in self.parts}

    def bounds(self, margin: float = 0.15) -> tuple[np.ndarray, np.ndarray]:
        lo = np.full(3, np.inf)
        hi = np.full(3, -np.inf)
        for p in self.parts:
            c = np.asarray(p.center)
            if p.shape == "sphere":
                ext = np.full(3, p.size[0])
            elif p.shape == "box":
                ext = np.asarray(p.size) / 2.0
            else:
                r, h = p.size
                ext = np.array([r, h / 2.0, r])
            lo = np.minimum(lo, c - ext)
            hi = np.maximum(hi, c + ext)
        pad = margin * float((hi - lo).max())
        return lo - pad, hi + pad

    def diameter(self) -> float:
        lo, hi = self.bounds(margin=0.0)
        return float(np.linalg.norm(hi - lo))

    def to_dict(self) -> dict:
        return {"parts": [p.to_dict() for p in self.parts]}

    @staticmethod
    def from_dict(d: dict) -> "ObjectModel":
        return ObjectModel(tuple(PartPrimitive.from_dict(p) for p in d["parts"]))


def briefcase_model() -> ObjectModel:
    """Box body with an off-center top handle and a side latch.

    Deliberately asymmetric: no rotation maps the part layout onto itself,
    so pose recovery from part-labeled clouds is well posed.
    """
    return ObjectModel((
        PartPrimitive("body", "box", (0.42, 0.30, 0.12), (0.0, 0.0, 0.0)),
        PartPrimitive("handle", "box", (0.16, 0.03, 0.03), (0.07, 0.185, 0.0)),
        PartPrimitive("latch", "box", (0.06, 0.05, 0.04), (-0.17, 0.06, 0.07)),
    ))


def table_model() -> ObjectModel:
    """Flat slab on a pedestal; used for stationary scenarios."""
    return ObjectModel((
        PartPrimitive("top", "box", (0.8, 0.05, 0.5), (0.0, 0.35, 0.0)),
        PartPrimitive("base", "box", (0.12, 0.65, 0.12), (0.0, 0.0, 0.0)),
    ))

"""Differentiable geometry used by the optimization losses.

All tensors are float64. Functions are batched over a leading frame
dimension where noted. Numerically delicate spots (norms at zero, log/exp
maps near the identity) use guarded formulations so gradients stay finite
everywhere; the guards change values by at most ~1e-12, and the exact
(report-mode) loss path avoids them entirely.
"""
from __future__ import annotations

import numpy as np
import torch

NORM_EPS = 1e-12     # guard for norms that may hit exactly zero
ANGLE_TAYLOR = 1e-4  # switch to series expansions below this angle
DEPTH_CLAMP = 1e-6   # minimum depth used by the differentiable projection


def safe_norm(x: torch.Tensor, dim: int = -1) -> torch.Tensor:
    """||x|| with a finite gradient at zero; value error <= NORM_EPS."""
    sq = (x * x).sum(dim=dim)
    return torch.sqrt(sq + NORM_EPS * NORM_EPS) - NORM_EPS


def rot6d_to_matrix(v: torch.Tensor) -> torch.Tensor:
    """Decode (..., 6) two-column parameters into (..., 3, 3) rotations."""
    a = v[..., :3]
    b = v[..., 3:]
    c1 = a / a.norm(dim=-1, keepdim=True).clamp_min(NORM_EPS)
    b_orth = b - (c1 * b).sum(dim=-1, keepdim=True) * c1
    c2 = b_orth / b_orth.norm(dim=-1, keepdim=True).clamp_min(NORM_EPS)
    c3 = torch.cross(c1, c2, dim=-1)
    return torch.stack([c1, c2, c3], dim=-1)


def matrix_to_rot6d(r: torch.Tensor) -> torch.Tensor:
    return torch.cat([r[..., :, 0], r[..., :, 1]], dim=-1)


def _vee(m: torch.Tensor) -> torch.Tensor:
    return torch.stack([m[..., 2, 1] - m[..., 1, 2],
                        m[..., 0, 2] - m[..., 2, 0],
                        m[..., 1, 0] - m[..., 0, 1]], dim=-1) / 2.0


def geodesic(r1: torch.Tensor, r2: torch.Tensor,
             exact: bool = False) -> torch.Tensor:
    """Batched geodesic distance on SO(3), radians in [0, pi].

    Both modes use atan2 of the sine norm against the cosine, which is
    accurate at all angles (the arccos-of-trace form bottoms out around
    sqrt(eps) near zero). ``exact`` takes the unguarded norm (gradient
    unstable at zero, evaluation only); the default guards it so
    gradients stay finite, at the cost of a ~1e-12 bias.
    """
    q = r1.transpose(-1, -2) @ r2
    cos = (q.diagonal(dim1=-2, dim2=-1).sum(-1) - 1.0) / 2.0
    v = _vee(q)  # sin(theta) * axis, nonneg norm on [0, pi]
    sin = torch.linalg.vector_norm(v, dim=-1) if exact else safe_norm(v)
    return torch.atan2(sin, cos)


def so3_log(r: torch.Tensor) -> torch.Tensor:
    """Batched rotation-vector log map, guarded near the identity.

    Uses atan2 of the (guarded) sine norm against the cosine so the
    gradient stays finite at the identity; degrades near pi, where callers
    fall back to other penalties.
    """
    w = _vee(r)  # sin(theta) * axis
    cos = (r.diagonal(dim1=-2, dim2=-1).sum(-1) - 1.0) / 2.0
    sin = safe_norm(w)
    theta = torch.atan2(sin, cos)
    small = theta < ANGLE_TAYLOR
    sin_safe = torch.where(small, torch.ones_like(sin), sin.clamp_min(NORM_EPS))
    factor_taylor = 1.0 + theta * theta / 6.0 + 7.0 * theta ** 4 / 360.0
    factor = torch.where(small, factor_taylor, theta / sin_safe)
    return w * factor.unsqueeze(-1)


def so3_exp(w: torch.Tensor) -> torch.Tensor:
    """Batched Rodrigues formula, guarded near zero."""
    theta_sq = (w * w).sum(-1)
    theta = torch.sqrt(theta_sq + NORM_EPS * NORM_EPS)
    small = theta < ANGLE_TAYLOR
    a = torch.where(small, 1.0 - theta_sq / 6.0, torch.sin(theta) / theta)
    b = torch.where(small, 0.5 - theta_sq / 24.0, (1.0 - torch.cos(theta)) / (theta * theta))
    zeros = torch.zeros_like(theta)
    k = torch.stack([
        zeros, -w[..., 2], w[..., 1],
        w[..., 2], zeros, -w[..., 0],
        -w[..., 1], w[..., 0], zeros,
    ], dim=-1).reshape(w.shape[:-1] + (3, 3))
    eye = torch.eye(3, dtype=w.dtype, device=w.device).expand(k.shape)
    return eye + a[..., None, None] * k + b[..., None, None] * (k @ k)


def slerp_midpoint(r1: torch.Tensor, r2: torch.Tensor) -> torch.Tensor:
    """Batched geodesic midpoint; callers handle the antipodal case."""
    return r1 @ so3_exp(0.5 * so3_log(r1.transpose(-1, -2) @ r2))


def project(points: torch.Tensor, fx: float, fy: float,
            cx: float, cy: float) -> torch.Tensor:
    """Pinhole projection of (..., 3) points to (..., 2) pixels.

    Depths are clamped to DEPTH_CLAMP so the loss stays finite when the
    optimizer momentarily pushes points behind the camera; the exact
    evaluation path and the brute-force oracle apply the same rule.
    """
    z = points[..., 2].clamp_min(DEPTH_CLAMP)
    u = fx * points[..., 0] / z + cx
    v = fy * points[..., 1] / z + cy
    return torch.stack([u, v], dim=-1)


class SdfTensor:
    """An SDF grid prepared for batched differentiable queries."""

    def __init__(self, origin, cell_size: float, values):
        self.origin = torch.tensor(np.array(origin, dtype=np.float64))
        self.cell = float(cell_size)
        self.values = torch.tensor(np.array(values, dtype=np.float64))
        self.dims = torch.tensor(self.values.shape, dtype=torch.float64)

    @staticmethod
    def from_grid(grid) -> "SdfTensor":
        return SdfTensor(grid.origin, grid.cell_size, grid.values)

    def query(self, points: torch.Tensor) -> torch.Tensor:
        """Trilinear signed distances for (..., 3) points.

        Outside the grid: boundary value plus the (guarded) distance to
        the grid box, as in the numpy implementation.
        """
        rel = (points - self.origin) / self.cell
        hi = self.dims - 1.0
        clamped = torch.minimum(torch.maximum(rel, torch.zeros_like(rel)), hi)
        outside = safe_norm((rel - clamped) * self.cell)

        i0 = torch.minimum(clamped.floor().long(), (hi - 1.0).long())
        f = clamped - i0
        v = self.values
        ix, iy, iz = i0[..., 0], i0[..., 1], i0[..., 2]
        fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
        c000 = v[ix, iy, iz]
        c100 = v[ix + 1, iy, iz]
        c010 = v[ix, iy + 1, iz]
        c110 = v[ix + 1, iy + 1, iz]
        c001 = v[ix, iy, iz + 1]
        c101 = v[ix + 1, iy, iz + 1]
        c011 = v[ix, iy + 1, iz + 1]
        c111 = v[ix + 1, iy + 1, iz + 1]
        c00 = c000 * (1 - fx) + c100 * fx
        c10 = c010 * (1 - fx) + c110 * fx
        c01 = c001 * (1 - fx) + c101 * fx
        c11 = c011 * (1 - fx) + c111 * fx
        c0 = c00 * (1 - fy) + c10 * fy
        c1 = c01 * (1 - fy) + c11 * fy
        return c0 * (1 - fz) + c1 * fz + outside

"""Compiled kernels for point-to-mesh distance and winding numbers.

numba is optional: when it is not importable the callers in ``sdf.py``
fall back to chunked numpy, which returns identical values but is an
order of magnitude slower.
"""
from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn
        return deco


@njit(cache=True)
def _closest_dist_sq_point_triangle(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz
    bpx, bpy, bpz = px - bx, py - by, pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        dx, dy, dz = apx - v * abx, apy - v * aby, apz - v * abz
        return dx * dx + dy * dy + dz * dz
    cpx, cpy, cpz = px - cx, py - cy, pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        dx, dy, dz = apx - w * acx, apy - w * acy, apz - w * acz
        return dx * dx + dy * dy + dz * dz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        dx = bpx - w * (cx - bx)
        dy = bpy - w * (cy - by)
        dz = bpz - w * (cz - bz)
        return dx * dx + dy * dy + dz * dz
    denom = va + vb + vc
    v = vb / denom
    w = vc / denom
    dx = apx - v * abx - w * acx
    dy = apy - v * aby - w * acy
    dz = apz - v * abz - w * acz
    return dx * dx + dy * dy + dz * dz


@njit(cache=True)
def min_dist_kernel(points, tri):
    """points (Q, 3), tri (F, 3, 3) -> unsigned distances (Q,)."""
    q = points.shape[0]
    f = tri.shape[0]
    out = np.empty(q)
    for i in range(q):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        best = np.inf
        for j in range(f):
            d = _closest_dist_sq_point_triangle(
                px, py, pz,
                tri[j, 0, 0], tri[j, 0, 1], tri[j, 0, 2],
                tri[j, 1, 0], tri[j, 1, 1], tri[j, 1, 2],
                tri[j, 2, 0], tri[j, 2, 1], tri[j, 2, 2],
            )
            if d < best:
                best = d
        out[i] = np.sqrt(best)
    return out


@njit(cache=True)
def winding_kernel(points, tri):
    """points (Q, 3), tri (F, 3, 3) -> generalized winding numbers (Q,)."""
    q = points.shape[0]
    f = tri.shape[0]
    out = np.empty(q)
    four_pi = 4.0 * np.pi
    for i in range(q):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        total = 0.0
        for j in range(f):
            vax, vay, vaz = tri[j, 0, 0] - px, tri[j, 0, 1] - py, tri[j, 0, 2] - pz
            vbx, vby, vbz = tri[j, 1, 0] - px, tri[j, 1, 1] - py, tri[j, 1, 2] - pz
            vcx, vcy, vcz = tri[j, 2, 0] - px, tri[j, 2, 1] - py, tri[j, 2, 2] - pz
            la = np.sqrt(vax * vax + vay * vay + vaz * vaz)
            lb = np.sqrt(vbx * vbx + vby * vby + vbz * vbz)
            lc = np.sqrt(vcx * vcx + vcy * vcy + vcz * vcz)
            # det([va vb vc]) via triple product
            crx = vby * vcz - vbz * vcy
            cry = vbz * vcx - vbx * vcz
            crz = vbx * vcy - vby * vcx
            det = vax * crx + vay * cry + vaz * crz
            denom = (la * lb * lc
                     + (vax * vbx + vay * vby + vaz * vbz) * lc
                     + (vbx * vcx + vby * vcy + vbz * vcz) * la
                     + (vcx * vax + vcy * vay + vcz * vaz) * lb)
            total += 2.0 * np.arctan2(det, denom)
        out[i] = total / four_pi
    return out

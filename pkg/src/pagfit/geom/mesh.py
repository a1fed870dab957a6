"""Triangle meshes, primitive constructors, and OBJ/PLY file IO.

Supported formats:
  - OBJ: ASCII, ``v`` and ``f`` records (polygons fan-triangulated).
  - PLY: ASCII and binary little-endian. Point-cloud PLYs carry a vertex
    element with an optional integer ``part_label`` property; mesh PLYs
    additionally carry a face element with a ``vertex_indices`` list.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DegenerateMeshError, FormatError
from .pointcloud import PointCloud


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray     # (F, 3) int64

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"vertices must be (V, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError(f"faces must be (F, 3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= v.shape[0]):
            raise FormatError("face index out of range")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    def triangle_areas(self) -> np.ndarray:
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def check_nondegenerate(self) -> "TriangleMesh":
        if self.faces.shape[0] == 0 or not np.any(self.triangle_areas() > 0):
            raise DegenerateMeshError("mesh has no triangles with positive area")
        return self

    def sample_surface(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform area-weighted surface samples, shape (n, 3)."""
        areas = self.triangle_areas()
        total = areas.sum()
        if total <= 0:
            raise DegenerateMeshError("cannot sample a zero-area mesh")
        idx = rng.choice(len(areas), size=n, p=areas / total)
        u, v = rng.random(n), rng.random(n)
        flip = u + v > 1
        u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
        a = self.vertices[self.faces[idx, 0]]
        b = self.vertices[self.faces[idx, 1]]
        c = self.vertices[self.faces[idx, 2]]
        return a + u[:, None] * (b - a) + v[:, None] * (c - a)


# ---------------------------------------------------------------------------
# primitive meshes

def box_mesh(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    sx, sy, sz = (s / 2.0 for s in size)
    cx, cy, cz = center
    corners = np.array([
        [-sx, -sy, -sz], [sx, -sy, -sz], [sx, sy, -sz], [-sx, sy, -sz],
        [-sx, -sy, sz], [sx, -sy, sz], [sx, sy, sz], [-sx, sy, sz],
    ]) + np.array([cx, cy, cz])
    faces = np.array([
        [0, 2, 1], [0, 3, 2],  # -z
        [4, 5, 6], [4, 6, 7],  # +z
        [0, 1, 5], [0, 5, 4],  # -y
        [3, 7, 6], [3, 6, 2],  # +y
        [0, 4, 7], [0, 7, 3],  # -x
        [1, 2, 6], [1, 6, 5],  # +x
    ])
    return TriangleMesh(corners, faces)


def icosphere_mesh(radius: float = 1.0, center=(0.0, 0.0, 0.0),
                   subdivisions: int = 3) -> TriangleMesh:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v) for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = np.add(verts[i], verts[j]) / 2.0
                m = m / np.linalg.norm(m)
                cache[key] = len(verts)
                verts.append(tuple(m))
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.array(verts) * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(v, np.array(faces, dtype=np.int64))


def cylinder_mesh(radius: float = 0.5, height: float = 1.0,
                  center=(0.0, 0.0, 0.0), axis: int = 1,
                  segments: int = 32) -> TriangleMesh:
    """Closed cylinder whose axis runs along coordinate ``axis``."""
    ang = np.linspace(0, 2 * np.pi, segments, endpoint=False)
    ring = np.stack([np.cos(ang) * radius, np.sin(ang) * radius], axis=1)
    h = height / 2.0
    order = {0: (2, 0, 1), 1: (0, 2, 1), 2: (0, 1, 2)}[axis]
    # build in local frame with the axis as the last coordinate, then permute

    def assemble(xy, z):
        local = np.column_stack([xy[:, 0], xy[:, 1], np.full(len(xy), z)])
        return local[:, order]

    bottom = assemble(ring, -h)
    top = assemble(ring, h)
    cb = assemble(np.zeros((1, 2)), -h)
    ct = assemble(np.zeros((1, 2)), h)
    verts = np.vstack([bottom, top, cb, ct]) + np.asarray(center, dtype=np.float64)
    n = segments
    faces = []
    for i in range(n):
        j = (i + 1) % n
        faces += [[i, j, n + i], [j, n + j, n + i]]          # side
        faces += [[2 * n, j, i], [2 * n + 1, n + i, n + j]]  # caps
    return TriangleMesh(verts, np.array(faces, dtype=np.int64))


# ---------------------------------------------------------------------------
# OBJ

def load_obj(path) -> TriangleMesh:
    verts, faces = [], []
    with open(path, "r") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(tok.split("/")[0]) for tok in parts[1:]]
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if not verts:
        raise FormatError(f"no vertices in OBJ file {path}")
    return TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64).reshape(-1, 3))


def save_obj(mesh: TriangleMesh, path) -> None:
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


# ---------------------------------------------------------------------------
# PLY

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _parse_ply_header(fh):
    magic = fh.readline().strip()
    if magic != b"ply":
        raise FormatError("not a PLY file")
    fmt = None
    elements = []  # (name, count, [(prop_name, dtype) or ('list', count_dt, item_dt, name)])
    while True:
        line = fh.readline()
        if not line:
            raise FormatError("unexpected end of PLY header")
        tokens = line.decode("ascii", "replace").split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if tokens[1] == "ascii":
                fmt = "ascii"
            elif tokens[1] == "binary_little_endian":
                fmt = "binary"
            else:
                raise FormatError(f"unsupported PLY format {tokens[1]}")
        elif tokens[0] == "element":
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise FormatError("property before element in PLY header")
            if tokens[1] == "list":
                elements[-1][2].append(("list", _PLY_TYPES[tokens[2]],
                                        _PLY_TYPES[tokens[3]], tokens[4]))
            else:
                elements[-1][2].append((tokens[2], _PLY_TYPES[tokens[1]]))
        elif tokens[0] == "end_header":
            break
    if fmt is None:
        raise FormatError("PLY header has no format line")
    return fmt, elements


def _read_ply_elements(path):
    with open(path, "rb") as fh:
        fmt, elements = _parse_ply_header(fh)
        data = {}
        if fmt == "ascii":
            tokens = fh.read().decode("ascii").split()
            pos = 0
            for name, count, props in elements:
                rows = []
                for _ in range(count):
                    row = {}
                    for p in props:
                        if p[0] == "list":
                            n = int(tokens[pos]); pos += 1
                            row[p[3]] = [float(tokens[pos + i]) for i in range(n)]
                            pos += n
                        else:
                            row[p[0]] = float(tokens[pos]); pos += 1
                    rows.append(row)
                data[name] = rows
        else:
            for name, count, props in elements:
                if any(p[0] == "list" for p in props):
                    rows = []
                    for _ in range(count):
                        row = {}
                        for p in props:
                            if p[0] == "list":
                                cdt = np.dtype("<" + p[1])
                                n = int(np.frombuffer(fh.read(cdt.itemsize), cdt)[0])
                                idt = np.dtype("<" + p[2])
                                row[p[3]] = np.frombuffer(fh.read(idt.itemsize * n), idt).tolist()
                            else:
                                dt = np.dtype("<" + p[1])
                                row[p[0]] = float(np.frombuffer(fh.read(dt.itemsize), dt)[0])
                        rows.append(row)
                    data[name] = rows
                else:
                    dt = np.dtype([(p[0], "<" + p[1]) for p in props])
                    arr = np.frombuffer(fh.read(dt.itemsize * count), dt, count=count)
                    data[name] = [{p[0]: float(arr[p[0]][i]) for p in props}
                                  for i in range(count)]
        return data


def load_ply_cloud(path) -> PointCloud:
    """Read a PLY vertex element as a point cloud; ``part_label`` if present."""
    data = _read_ply_elements(path)
    if "vertex" not in data:
        raise FormatError(f"PLY file {path} has no vertex element")
    rows = data["vertex"]
    pts = np.array([[r["x"], r["y"], r["z"]] for r in rows], dtype=np.float64)
    labels = None
    if rows and "part_label" in rows[0]:
        labels = np.array([int(r["part_label"]) for r in rows], dtype=np.int64)
    return PointCloud(pts, labels)


def save_ply_cloud(cloud: PointCloud, path, binary: bool = True) -> None:
    n = len(cloud)
    labeled = cloud.labels is not None
    header = ["ply",
              "format binary_little_endian 1.0" if binary else "format ascii 1.0",
              f"element vertex {n}",
              "property double x", "property double y", "property double z"]
    if labeled:
        header.append("property int part_label")
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            if labeled:
                dt = np.dtype([("x", "<f8"), ("y", "<f8"), ("z", "<f8"), ("part_label", "<i4")])
                arr = np.empty(n, dt)
                arr["x"], arr["y"], arr["z"] = cloud.points.T
                arr["part_label"] = cloud.labels
            else:
                dt = np.dtype([("x", "<f8"), ("y", "<f8"), ("z", "<f8")])
                arr = np.empty(n, dt)
                arr["x"], arr["y"], arr["z"] = cloud.points.T
            fh.write(arr.tobytes())
        else:
            for i in range(n):
                p = cloud.points[i]
                line = f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}"
                if labeled:
                    line += f" {int(cloud.labels[i])}"
                fh.write((line + "\n").encode("ascii"))


def load_ply_mesh(path) -> TriangleMesh:
    data = _read_ply_elements(path)
    if "vertex" not in data or "face" not in data:
        raise FormatError(f"PLY file {path} lacks vertex/face elements")
    pts = np.array([[r["x"], r["y"], r["z"]] for r in data["vertex"]], dtype=np.float64)
    faces = []
    for row in data["face"]:
        idx = [int(i) for i in next(iter(row.values()))]
        for k in range(1, len(idx) - 1):
            faces.append([idx[0], idx[k], idx[k + 1]])
    return TriangleMesh(pts, np.array(faces, dtype=np.int64).reshape(-1, 3))


def save_ply_mesh(mesh: TriangleMesh, path, binary: bool = True) -> None:
    header = ["ply",
              "format binary_little_endian 1.0" if binary else "format ascii 1.0",
              f"element vertex {len(mesh.vertices)}",
              "property double x", "property double y", "property double z",
              f"element face {len(mesh.faces)}",
              "property list uchar int vertex_indices",
              "end_header"]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(np.ascontiguousarray(mesh.vertices, "<f8").tobytes())
            for f in mesh.faces:
                fh.write(struct.pack("<B3i", 3, int(f[0]), int(f[1]), int(f[2])))
        else:
            for v in mesh.vertices:
                fh.write(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n".encode("ascii"))
            for f in mesh.faces:
                fh.write(f"3 {f[0]} {f[1]} {f[2]}\n".encode("ascii"))


def load_mesh(path) -> TriangleMesh:
    """Dispatch on file extension (.obj or .ply)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".obj":
        return load_obj(path)
    if suffix == ".ply":
        return load_ply_mesh(path)
    raise FormatError(f"unsupported mesh format {suffix!r}")

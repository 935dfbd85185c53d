"""Point cloud and triangle mesh containers plus PLY/OBJ file IO.

Clouds are written as binary little-endian PLY with float64 x, y, z.
Meshes are written as OBJ.  Per-point labels are in-memory diagnostics and
are not persisted.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray  # (n, 3) float64
    labels: tuple[str, ...] | None = None  # per-point source (composite child id)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float).reshape(-1, 3))
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != pts.shape[0]:
                raise ValueError("labels length must match point count")
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.points.shape[0]

    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def bounding_radius(self) -> float:
        c = self.centroid()
        return float(np.max(np.linalg.norm(self.points - c, axis=1)))

    def take(self, indices) -> "PointCloud":
        idx = np.asarray(indices)
        labels = None
        if self.labels is not None:
            labels = tuple(self.labels[i] for i in np.atleast_1d(idx))
        return PointCloud(self.points[idx], labels)


@dataclass(frozen=True, eq=False)
class CloudPair:
    """Observations of one scene before and after an articulation motion.

    When ``correspondence`` is set, index i in both clouds is the same
    material point and the clouds have equal length.
    """

    initial: PointCloud
    final: PointCloud
    correspondence: bool = False

    def __post_init__(self):
        if self.correspondence and len(self.initial) != len(self.final):
            raise ValueError("corresponding clouds must have equal length")


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray  # (v, 3)
    triangles: np.ndarray  # (t, 3) int indices
    labels: tuple[str, ...] | None = None  # per-triangle source child id

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=float).reshape(-1, 3))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3))
        if t.size and (t.min() < 0 or t.max() >= v.shape[0]):
            raise ValueError("triangle indices out of range")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    def areas(self) -> np.ndarray:
        a = self.vertices[self.triangles[:, 0]]
        b = self.vertices[self.triangles[:, 1]]
        c = self.vertices[self.triangles[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def area(self) -> float:
        return float(self.areas().sum())

    def transformed(self, pose) -> "TriMesh":
        from .geometry import transform_point

        return TriMesh(transform_point(pose, self.vertices), self.triangles, self.labels)


def merge_meshes(meshes: list[TriMesh], labels: list[str] | None = None) -> TriMesh:
    verts, tris, tri_labels = [], [], []
    offset = 0
    for i, m in enumerate(meshes):
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        if labels is not None:
            tri_labels.extend([labels[i]] * m.triangles.shape[0])
        offset += m.vertices.shape[0]
    return TriMesh(
        np.vstack(verts),
        np.vstack(tris),
        tuple(tri_labels) if labels is not None else None,
    )


# -- PLY ----------------------------------------------------------------------

_PLY_HEADER = (
    "ply\n"
    "format binary_little_endian 1.0\n"
    "element vertex {n}\n"
    "property double x\n"
    "property double y\n"
    "property double z\n"
    "end_header\n"
)


def write_ply(path, cloud: PointCloud) -> None:
    data = np.ascontiguousarray(cloud.points, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_PLY_HEADER.format(n=len(cloud)).encode("ascii"))
        fh.write(data.tobytes())


def read_ply(path) -> PointCloud:
    with open(path, "rb") as fh:
        blob = fh.read()
    end = blob.find(b"end_header\n")
    if not blob.startswith(b"ply") or end < 0:
        raise ParseError(f"{path}: not a PLY file (missing header)")
    header = blob[:end].decode("ascii", errors="replace").splitlines()
    n = None
    props = []
    fmt = None
    for lineno, line in enumerate(header, start=1):
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            if parts[1] != "vertex":
                raise ParseError(f"{path}:{lineno}: unsupported element {parts[1]!r}")
            n = int(parts[2])
        elif parts[0] == "property":
            props.append((parts[1], parts[2]))
    if fmt != "binary_little_endian":
        raise ParseError(f"{path}: unsupported PLY format {fmt!r}")
    if n is None:
        raise ParseError(f"{path}: missing vertex element")
    if props != [("double", "x"), ("double", "y"), ("double", "z")]:
        raise ParseError(f"{path}: expected double x/y/z properties, got {props}")
    body = blob[end + len(b"end_header\n"):]
    expected = n * 3 * 8
    if len(body) < expected:
        raise ParseError(
            f"{path}: truncated payload ({len(body)} bytes, expected {expected})"
        )
    pts = np.frombuffer(body[:expected], dtype="<f8").reshape(n, 3)
    return PointCloud(pts.copy())


# -- OBJ ----------------------------------------------------------------------


def write_obj(path, mesh: TriMesh) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def read_obj(path) -> TriMesh:
    verts, tris = [], []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise ParseError(f"{path}:{lineno}: short vertex line")
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif parts[0] == "f":
                if len(parts) != 4:
                    raise ParseError(f"{path}:{lineno}: only triangles supported")
                tris.append([int(p.split("/")[0]) - 1 for p in parts[1:]])
    return TriMesh(np.array(verts), np.array(tris, dtype=np.int64).reshape(-1, 3))

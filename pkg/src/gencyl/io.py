"""Deterministic file I/O and volume/mesh conversions.

Formats: label volumes as raw little-endian u8/u16 with a flat key:value
.meta sidecar, point clouds and frames as whitespace-separated text with 17
significant digits (exact float64 round-trip), skeleton graphs as SWC, and
triangle meshes from minimal OBJ. Volume indexing is C-order (z fastest) with
points placed at voxel centers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Set, Tuple

import numpy as np

from .errors import (
    CyclicParentage,
    MixedArity,
    NonPolygonalFace,
    ParseError,
    ShapeMismatch,
)
from .geometry import (
    FramedSkeleton,
    PointCloud,
    as_point3,
    as_points,
    compute_arc_length,
)

_FMT = "%.17g"

_VOLUME_DTYPES = {"uint8": np.dtype("<u1"), "uint16": np.dtype("<u2")}


@dataclass
class VolumeGrid:
    """Dense label volume: shape (nx, ny, nz), C-order data, voxel sizes in world units."""

    shape: Tuple[int, int, int]
    voxel_size: Tuple[float, float, float]
    origin: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        self.voxel_size = tuple(float(s) for s in self.voxel_size)
        if len(self.shape) != 3 or any(s <= 0 for s in self.shape):
            raise ValueError("shape must be three positive integers")
        if len(self.voxel_size) != 3 or any(s <= 0 for s in self.voxel_size):
            raise ValueError("voxel_size must be three positive reals")
        self.origin = as_point3(self.origin)
        self.data = np.asarray(self.data)
        if self.data.ndim == 1:
            if self.data.size != int(np.prod(self.shape)):
                raise ShapeMismatch(
                    f"data has {self.data.size} voxels, shape wants {int(np.prod(self.shape))}"
                )
            self.data = self.data.reshape(self.shape)
        elif self.data.shape != self.shape:
            raise ShapeMismatch(f"data shape {self.data.shape} != grid shape {self.shape}")
        if not np.issubdtype(self.data.dtype, np.integer):
            raise ValueError("volume labels must be integers")
        if self.data.size and int(self.data.min()) < 0:
            raise ValueError("volume labels must be non-negative")

    def voxel_centers(self) -> np.ndarray:
        """(nx*ny*nz, 3) centers in C-order scan order."""
        nx, ny, nz = self.shape
        ii, jj, kk = np.meshgrid(
            np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"
        )
        idx = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)
        return self.origin + (idx + 0.5) * np.asarray(self.voxel_size)


@dataclass
class TriMesh:
    """Triangle mesh; faces index into vertices and are combinatorially non-degenerate."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = as_points(self.vertices)
        self.faces = np.asarray(self.faces, dtype=np.int64)
        if self.faces.size == 0:
            self.faces = self.faces.reshape(0, 3)
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError("faces must be (nf, 3) integer triples")
        if self.faces.size:
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise ValueError("face index outside vertex range")
            a, b, c = self.faces.T
            if np.any((a == b) | (b == c) | (a == c)):
                raise ValueError("degenerate face with repeated vertices")


def volume_to_points(vol: VolumeGrid, foreground: Optional[Iterable[int]] = None) -> PointCloud:
    """One point per foreground voxel at its center, labels copied, grid scan order.

    foreground defaults to every nonzero label.
    """
    if foreground is None:
        mask = vol.data != 0
    else:
        mask = np.isin(vol.data, np.asarray(sorted(set(int(f) for f in foreground))))
    idx = np.argwhere(mask)
    pts = vol.origin + (idx + 0.5) * np.asarray(vol.voxel_size)
    return PointCloud(pts, labels=vol.data[mask].astype(np.int64))


def winding_number(p, mesh: TriMesh) -> float:
    """Normalized total signed solid angle of the mesh seen from p.

    Approximately 1 inside a closed outward-oriented mesh and 0 outside.
    """
    value, _ = winding_number_with_flag(p, mesh)
    return value


def winding_number_with_flag(p, mesh: TriMesh, plane_tol: float = 1e-12) -> Tuple[float, bool]:
    """Winding number plus a flag marking p within plane_tol of some face plane."""
    p = as_point3(p)
    w = _winding_numbers(p[None, :], mesh)
    near = _near_face_plane(p, mesh, plane_tol)
    return float(w[0]), near


def _winding_numbers(points: np.ndarray, mesh: TriMesh, chunk: int = 0) -> np.ndarray:
    """Vectorized solid-angle sums (van Oosterom-Strackee) for many query points."""
    if mesh.faces.size == 0:
        return np.zeros(len(points))
    va = mesh.vertices[mesh.faces[:, 0]]
    vb = mesh.vertices[mesh.faces[:, 1]]
    vc = mesh.vertices[mesh.faces[:, 2]]
    if chunk <= 0:
        # ~8 float64 intermediates of size chunk*nf each; stay near 256 MB.
        chunk = max(1, int(4.0e6 / max(len(mesh.faces), 1)) * 64)
    out = np.empty(len(points))
    for s in range(0, len(points), chunk):
        p = points[s:s + chunk]
        a = va[None, :, :] - p[:, None, :]
        b = vb[None, :, :] - p[:, None, :]
        c = vc[None, :, :] - p[:, None, :]
        la = np.linalg.norm(a, axis=2)
        lb = np.linalg.norm(b, axis=2)
        lc = np.linalg.norm(c, axis=2)
        det = np.einsum("pfi,pfi->pf", a, np.cross(b, c))
        denom = (
            la * lb * lc
            + np.einsum("pfi,pfi->pf", a, b) * lc
            + np.einsum("pfi,pfi->pf", b, c) * la
            + np.einsum("pfi,pfi->pf", c, a) * lb
        )
        out[s:s + chunk] = np.arctan2(det, denom).sum(axis=1)
    return out / (2.0 * np.pi)


def _near_face_plane(p: np.ndarray, mesh: TriMesh, tol: float) -> bool:
    if mesh.faces.size == 0:
        return False
    v0 = mesh.vertices[mesh.faces[:, 0]]
    n = np.cross(
        mesh.vertices[mesh.faces[:, 1]] - v0, mesh.vertices[mesh.faces[:, 2]] - v0
    )
    nn = np.linalg.norm(n, axis=1)
    ok = nn > 0
    dist = np.abs(np.einsum("fi,fi->f", p[None, :] - v0, n))
    return bool(np.any(dist[ok] <= tol * nn[ok]))


def voxelize_mesh(mesh: TriMesh, shape: Tuple[int, int, int],
                  voxel_size: Tuple[float, float, float], origin,
                  threshold: float = 0.5) -> VolumeGrid:
    """Label 1 every voxel whose center has winding number above threshold.

    Meaningful only for closed orientable meshes; garbage in, garbage out.
    """
    grid = VolumeGrid(shape, voxel_size, origin, np.zeros(shape, dtype=np.uint8))
    w = _winding_numbers(grid.voxel_centers(), mesh)
    grid.data = (w > threshold).astype(np.uint8).reshape(shape)
    return grid


def grid_for_mesh(mesh: TriMesh, resolution: float, pad: int = 2
                  ) -> Tuple[Tuple[int, int, int], Tuple[float, float, float], np.ndarray]:
    """Cubic-voxel grid spec covering the mesh bounding box plus pad voxels."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    lo = mesh.vertices.min(axis=0) - pad * resolution
    hi = mesh.vertices.max(axis=0) + pad * resolution
    shape = tuple(int(np.ceil((hi[i] - lo[i]) / resolution)) for i in range(3))
    return shape, (resolution,) * 3, lo


# --------------------------------------------------------------------------
# SWC skeleton graphs
# --------------------------------------------------------------------------

def load_swc(path) -> "SkeletonGraph":
    """Parse SWC rows "id type x y z radius parent" into an undirected graph.

    Comment (#) and blank lines are skipped; ids are arbitrary but unique,
    parent -1 marks a root. Unknown parents raise ParseError, parent cycles
    raise CyclicParentage.
    """
    from .skeletonize import SkeletonGraph

    ids: List[int] = []
    index = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 7:
                raise ParseError(f"expected 7 fields, got {len(fields)}", path, lineno)
            try:
                nid = int(fields[0])
                xyz = [float(fields[2]), float(fields[3]), float(fields[4])]
                radius = float(fields[5])
                parent = int(fields[6])
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from None
            if nid in index:
                raise ParseError(f"duplicate id {nid}", path, lineno)
            index[nid] = len(ids)
            ids.append(nid)
            rows.append((lineno, xyz, radius, parent))

    vertices = np.array([r[1] for r in rows], dtype=np.float64).reshape(len(rows), 3)
    radii = np.array([r[2] for r in rows], dtype=np.float64)
    parents = np.full(len(rows), -1, dtype=np.int64)
    edges: Set[Tuple[int, int]] = set()
    for i, (lineno, _, _, parent) in enumerate(rows):
        if parent == -1:
            continue
        if parent not in index:
            raise ParseError(f"unknown parent id {parent}", path, lineno)
        j = index[parent]
        if j == i:
            raise CyclicParentage(f"vertex id {ids[i]} is its own parent")
        parents[i] = j
        edges.add((min(i, j), max(i, j)))

    # Parent chains must terminate at a root.
    state = np.zeros(len(rows), dtype=np.int8)  # 0 unvisited, 1 in progress, 2 done
    for start in range(len(rows)):
        chain = []
        cur = start
        while cur != -1 and state[cur] == 0:
            state[cur] = 1
            chain.append(cur)
            cur = int(parents[cur])
        if cur != -1 and state[cur] == 1:
            raise CyclicParentage(f"parent links of id {ids[cur]} form a cycle")
        for c in chain:
            state[c] = 2

    return SkeletonGraph(vertices, edges, radii=radii)


def save_swc(graph, path):
    """Write a forest graph as SWC (ids 1-based in vertex order); radii default to 1.

    Graphs containing cycles cannot be expressed and raise CyclicParentage.
    """
    import networkx as nx

    nxg = graph.to_networkx()
    if len(graph) and nx.number_of_edges(nxg) != len(graph) - nx.number_connected_components(nxg):
        raise CyclicParentage("graph contains a cycle; SWC stores forests only")
    parents = np.full(len(graph), -1, dtype=np.int64)
    seen = np.zeros(len(graph), dtype=bool)
    for root in range(len(graph)):
        if seen[root]:
            continue
        seen[root] = True
        stack = [root]
        while stack:
            v = stack.pop()
            for w in sorted(nxg.neighbors(v), reverse=True):
                if not seen[w]:
                    seen[w] = True
                    parents[w] = v
                    stack.append(w)
    radii = graph.radii if graph.radii is not None else np.ones(len(graph))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# id type x y z radius parent\n")
        for i in range(len(graph)):
            x, y, z = graph.vertices[i]
            parent = parents[i] + 1 if parents[i] >= 0 else -1
            fh.write(
                f"{i + 1} 0 {_FMT % x} {_FMT % y} {_FMT % z} {_FMT % radii[i]} {parent}\n"
            )


# --------------------------------------------------------------------------
# Point-cloud text
# --------------------------------------------------------------------------

def load_pointcloud(path) -> PointCloud:
    """Read "x y z" or "x y z label" rows; mixing the two arities is an error."""
    pts: List[List[float]] = []
    labels: List[int] = []
    arity = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) not in (3, 4):
                raise ParseError(f"expected 3 or 4 columns, got {len(fields)}", path, lineno)
            if arity is None:
                arity = len(fields)
            elif len(fields) != arity:
                raise MixedArity(f"{path}: line {lineno}: row has {len(fields)} columns, "
                                 f"earlier rows had {arity}")
            try:
                pts.append([float(fields[0]), float(fields[1]), float(fields[2])])
                if arity == 4:
                    labels.append(int(fields[3]))
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from None
    points = np.asarray(pts, dtype=np.float64).reshape(len(pts), 3)
    return PointCloud(points, labels=np.asarray(labels, dtype=np.int64) if arity == 4 else None)


def save_pointcloud(cloud: PointCloud, path):
    """Write the cloud as text with 17 significant digits (exact round-trip)."""
    with open(path, "w", encoding="utf-8") as fh:
        if cloud.labels is None:
            for x, y, z in cloud.points:
                fh.write(f"{_FMT % x} {_FMT % y} {_FMT % z}\n")
        else:
            for (x, y, z), lab in zip(cloud.points, cloud.labels):
                fh.write(f"{_FMT % x} {_FMT % y} {_FMT % z} {int(lab)}\n")


def load_labels(path) -> np.ndarray:
    """Read one integer label per line."""
    out: List[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                out.append(int(line))
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from None
    return np.asarray(out, dtype=np.int64)


def save_labels(labels, path):
    with open(path, "w", encoding="utf-8") as fh:
        for lab in np.asarray(labels, dtype=np.int64):
            fh.write(f"{int(lab)}\n")


# --------------------------------------------------------------------------
# Cylindrical-cloud text
# --------------------------------------------------------------------------

def load_cylindrical(path):
    """Read "rho phi g vertex_index tangential_offset [label]" rows."""
    from .geometry import CylindricalCloud

    rows: List[List[float]] = []
    labels: List[int] = []
    arity = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) not in (5, 6):
                raise ParseError(f"expected 5 or 6 columns, got {len(fields)}", path, lineno)
            if arity is None:
                arity = len(fields)
            elif len(fields) != arity:
                raise MixedArity(f"{path}: line {lineno}: row has {len(fields)} columns, "
                                 f"earlier rows had {arity}")
            try:
                rows.append([float(fields[0]), float(fields[1]), float(fields[2]),
                             float(fields[3]), float(fields[4])])
                if arity == 6:
                    labels.append(int(fields[5]))
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from None
    arr = np.asarray(rows, dtype=np.float64).reshape(len(rows), 5)
    return CylindricalCloud(
        arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3].astype(np.int64), arr[:, 4],
        labels=np.asarray(labels, dtype=np.int64) if arity == 6 else None,
    )


def save_cylindrical(ccloud, path):
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(len(ccloud)):
            row = (f"{_FMT % ccloud.rho[i]} {_FMT % ccloud.phi[i]} {_FMT % ccloud.g[i]} "
                   f"{int(ccloud.vertex_index[i])} {_FMT % ccloud.tangential_offset[i]}")
            if ccloud.labels is not None:
                row += f" {int(ccloud.labels[i])}"
            fh.write(row + "\n")


# --------------------------------------------------------------------------
# Framed-skeleton text
# --------------------------------------------------------------------------

def load_frames(path) -> FramedSkeleton:
    """Read "x y z tx ty tz nx ny nz bx by bz" rows; arc length is recomputed."""
    rows: List[List[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 12:
                raise ParseError(f"expected 12 columns, got {len(fields)}", path, lineno)
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from None
    arr = np.asarray(rows, dtype=np.float64).reshape(len(rows), 12)
    skeleton = compute_arc_length(arr[:, 0:3])
    return FramedSkeleton(skeleton, arr[:, 3:6], arr[:, 6:9], arr[:, 9:12])


def save_frames(fs: FramedSkeleton, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# x y z tx ty tz nx ny nz bx by bz\n")
        for i in range(len(fs)):
            row = np.concatenate(
                [fs.skeleton.vertices[i], fs.tangents[i], fs.normals[i], fs.binormals[i]]
            )
            fh.write(" ".join(_FMT % v for v in row) + "\n")


# --------------------------------------------------------------------------
# Raw label volumes with .meta sidecar
# --------------------------------------------------------------------------

def load_volume(path) -> VolumeGrid:
    """Read a raw little-endian label volume described by its .meta sidecar."""
    meta_path = str(path) + ".meta"
    fields = {}
    with open(meta_path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise ParseError("expected 'key: value'", meta_path, lineno)
            key, value = line.split(":", 1)
            key = key.strip()
            if key in fields:
                raise ParseError(f"duplicate key {key!r}", meta_path, lineno)
            if key not in ("shape", "dtype", "voxel_size", "origin"):
                raise ParseError(f"unknown key {key!r}", meta_path, lineno)
            fields[key] = value.strip()
    for key in ("shape", "dtype", "voxel_size", "origin"):
        if key not in fields:
            raise ParseError(f"missing key {key!r}", meta_path)
    try:
        shape = tuple(int(v) for v in fields["shape"].split())
        voxel_size = tuple(float(v) for v in fields["voxel_size"].split())
        origin = np.array([float(v) for v in fields["origin"].split()])
    except ValueError as exc:
        raise ParseError(str(exc), meta_path) from None
    if fields["dtype"] not in _VOLUME_DTYPES:
        raise ParseError(f"dtype must be uint8 or uint16, got {fields['dtype']!r}", meta_path)
    dtype = _VOLUME_DTYPES[fields["dtype"]]
    data = np.fromfile(path, dtype=dtype)
    if len(shape) != 3 or data.size != int(np.prod(shape)):
        raise ShapeMismatch(
            f"{path}: payload has {data.size} voxels, shape {shape} wants {int(np.prod(shape))}"
        )
    return VolumeGrid(shape, voxel_size, origin, data.reshape(shape))


def save_volume(vol: VolumeGrid, path):
    """Write raw little-endian voxels plus the .meta sidecar; u8 unless labels exceed 255."""
    peak = int(vol.data.max()) if vol.data.size else 0
    if peak > 65535:
        raise ValueError("labels above 65535 do not fit the volume format")
    name = "uint16" if peak > 255 else "uint8"
    vol.data.astype(_VOLUME_DTYPES[name]).tofile(path)
    with open(str(path) + ".meta", "w", encoding="utf-8") as fh:
        fh.write(f"shape: {vol.shape[0]} {vol.shape[1]} {vol.shape[2]}\n")
        fh.write(f"dtype: {name}\n")
        fh.write(f"voxel_size: {_FMT % vol.voxel_size[0]} {_FMT % vol.voxel_size[1]} "
                 f"{_FMT % vol.voxel_size[2]}\n")
        fh.write(f"origin: {_FMT % vol.origin[0]} {_FMT % vol.origin[1]} "
                 f"{_FMT % vol.origin[2]}\n")


# --------------------------------------------------------------------------
# OBJ meshes
# --------------------------------------------------------------------------

def load_obj(path) -> TriMesh:
    """Parse v/f records; polygons are fan-triangulated, other records ignored."""
    vertices: List[List[float]] = []
    faces: List[Tuple[int, int, int]] = []
    face_lines: List[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if fields[0] == "v":
                if len(fields) < 4:
                    raise ParseError("vertex needs 3 coordinates", path, lineno)
                try:
                    vertices.append([float(fields[1]), float(fields[2]), float(fields[3])])
                except ValueError as exc:
                    raise ParseError(str(exc), path, lineno) from None
            elif fields[0] == "f":
                idx = []
                for token in fields[1:]:
                    head = token.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise ParseError(f"bad face index {token!r}", path, lineno) from None
                    if i < 0:
                        raise ParseError("negative OBJ indices are not supported", path, lineno)
                    idx.append(i - 1)
                if len(idx) < 3:
                    raise NonPolygonalFace(f"{path}: line {lineno}: face with {len(idx)} vertices")
                for k in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[k], idx[k + 1]))
                    face_lines.append(lineno)
    varr = np.asarray(vertices, dtype=np.float64).reshape(len(vertices), 3)
    farr = np.asarray(faces, dtype=np.int64).reshape(len(faces), 3)
    if farr.size and (farr.min() < 0 or farr.max() >= len(varr)):
        bad = int(np.nonzero((farr < 0).any(axis=1) | (farr >= len(varr)).any(axis=1))[0][0])
        raise ParseError("face references a missing vertex", path, face_lines[bad])
    return TriMesh(varr, farr)

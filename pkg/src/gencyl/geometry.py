"""Core geometry: skeletons, moving orthonormal frames, and the cylindrical transform.

A skeleton is an ordered 3D polyline with cumulative arc length. Each vertex
carries a right-handed orthonormal frame (tangent, normal, binormal); the
forward transform re-expresses a point cloud relative to those frames as
(rho, phi, g) plus the nearest-vertex index and the tangential offset that
makes the inverse exact. All functions here are pure: inputs are never
mutated and identical inputs produce bitwise-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegenerateSkeleton,
    EmptyCloud,
    IndexOutOfRange,
    NonOrthonormalRotation,
)

TWO_PI = 2.0 * np.pi

# NB-plane projections shorter than this get azimuth 0 (point on the tangent axis).
AXIS_EPS = 1e-12

# Curvature magnitude (per unit arc length) below which a vertex counts as straight.
DEFAULT_STRAIGHTNESS_EPS = 1e-8

_ORTHO_TOL = 1e-9


def as_point3(p) -> np.ndarray:
    """Coerce to a finite (3,) float64 array."""
    a = np.asarray(p, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("point has non-finite coordinates")
    return a


def as_points(points) -> np.ndarray:
    """Coerce to a finite (n, 3) float64 array; empty input becomes (0, 3)."""
    a = np.asarray(points, dtype=np.float64)
    if a.size == 0:
        return a.reshape(0, 3)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"expected an (n, 3) array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("points contain non-finite coordinates")
    return a


@dataclass
class PointCloud:
    """Ordered 3D points with optional per-point non-negative integer labels."""

    points: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = as_points(self.points)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (len(self.points),):
                raise ValueError("labels length must match points length")
            if self.labels.size and self.labels.min() < 0:
                raise ValueError("labels must be non-negative")

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class Skeleton:
    """Ordered polyline with cumulative arc length (cum_arc[0] == 0, strictly increasing)."""

    vertices: np.ndarray
    cum_arc: np.ndarray

    def __post_init__(self):
        self.vertices = as_points(self.vertices)
        self.cum_arc = np.asarray(self.cum_arc, dtype=np.float64)
        if len(self.vertices) < 2:
            raise DegenerateSkeleton("skeleton needs at least two vertices")
        if self.cum_arc.shape != (len(self.vertices),):
            raise ValueError("cum_arc length must match vertex count")
        if self.cum_arc[0] != 0.0 or np.any(np.diff(self.cum_arc) <= 0.0):
            raise DegenerateSkeleton("cum_arc must start at 0 and be strictly increasing")

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def total_length(self) -> float:
        return float(self.cum_arc[-1])


def compute_arc_length(vertices) -> Skeleton:
    """Build a Skeleton from an ordered polyline by accumulating segment lengths.

    Raises DegenerateSkeleton for fewer than two vertices or any zero-length segment.
    """
    v = as_points(vertices)
    if len(v) < 2:
        raise DegenerateSkeleton("skeleton needs at least two vertices")
    seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
    zero = np.nonzero(seg == 0.0)[0]
    if zero.size:
        raise DegenerateSkeleton(f"zero-length segment between vertices {zero[0]} and {zero[0] + 1}")
    cum = np.empty(len(v))
    cum[0] = 0.0
    np.cumsum(seg, out=cum[1:])
    return Skeleton(v, cum)


@dataclass
class FramedSkeleton:
    """Skeleton plus per-vertex right-handed orthonormal (t, n, b) frames."""

    skeleton: Skeleton
    tangents: np.ndarray
    normals: np.ndarray
    binormals: np.ndarray

    def __post_init__(self):
        m = len(self.skeleton)
        for name in ("tangents", "normals", "binormals"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (m, 3):
                raise ValueError(f"{name} must have shape ({m}, 3)")
            setattr(self, name, arr)
        t, n, b = self.tangents, self.normals, self.binormals
        residual = max(
            np.abs(np.linalg.norm(t, axis=1) - 1.0).max(),
            np.abs(np.linalg.norm(n, axis=1) - 1.0).max(),
            np.abs(np.linalg.norm(b, axis=1) - 1.0).max(),
            np.abs(np.einsum("ij,ij->i", t, n)).max(),
            np.abs(np.einsum("ij,ij->i", t, b)).max(),
            np.abs(np.einsum("ij,ij->i", n, b)).max(),
            np.abs(b - np.cross(t, n)).max(),
        )
        if residual > _ORTHO_TOL:
            raise ValueError(f"frames are not right-handed orthonormal (residual {residual:.3e})")

    def __len__(self) -> int:
        return len(self.skeleton)

    def frame(self, i: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.tangents[i], self.normals[i], self.binormals[i]


class CylindricalPoint(NamedTuple):
    rho: float
    phi: float
    g: float
    vertex_index: int
    tangential_offset: float


@dataclass
class CylindricalCloud:
    """Per-point cylindrical coordinates, ordered 1:1 with the source cloud.

    rho is the full Euclidean distance to the nearest skeleton vertex, phi the
    azimuth in that vertex's NB plane in [0, 2*pi), g the vertex's cumulative
    arc length, and tangential_offset the component of the vertex-to-point
    vector along the tangent (needed for an exact inverse).
    """

    rho: np.ndarray
    phi: np.ndarray
    g: np.ndarray
    vertex_index: np.ndarray
    tangential_offset: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=np.float64)
        self.phi = np.asarray(self.phi, dtype=np.float64)
        self.g = np.asarray(self.g, dtype=np.float64)
        self.vertex_index = np.asarray(self.vertex_index, dtype=np.int64)
        self.tangential_offset = np.asarray(self.tangential_offset, dtype=np.float64)
        n = len(self.rho)
        for name in ("phi", "g", "vertex_index", "tangential_offset"):
            if len(getattr(self, name)) != n:
                raise ValueError("cylindrical coordinate arrays must share one length")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != n:
                raise ValueError("labels length must match point count")

    def __len__(self) -> int:
        return len(self.rho)

    def point(self, i: int) -> CylindricalPoint:
        return CylindricalPoint(
            float(self.rho[i]),
            float(self.phi[i]),
            float(self.g[i]),
            int(self.vertex_index[i]),
            float(self.tangential_offset[i]),
        )


@dataclass
class RigidTransform:
    """Proper rigid motion p -> R p + t with R orthonormal, det(R) = +1."""

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = as_point3(self.translation)
        self.validate()

    def validate(self):
        r = self.rotation
        if r.shape != (3, 3):
            raise NonOrthonormalRotation("rotation must be a 3x3 matrix")
        if np.abs(r @ r.T - np.eye(3)).max() > 1e-9 or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise NonOrthonormalRotation("rotation must be orthonormal with determinant +1")

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Rotation matrix drawn uniformly over SO(3) via a random unit quaternion."""
    u1, u2, u3 = rng.random(3)
    a, b = np.sqrt(1.0 - u1), np.sqrt(u1)
    w = a * np.sin(TWO_PI * u2)
    x = a * np.cos(TWO_PI * u2)
    y = b * np.sin(TWO_PI * u3)
    z = b * np.cos(TWO_PI * u3)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _seed_normal(t: np.ndarray) -> np.ndarray:
    """Fixed unit vector perpendicular to t: project the axis with the smallest |component|."""
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(t)))] = 1.0
    cand = axis - (axis @ t) * t
    return cand / np.linalg.norm(cand)


def _arc_derivative(values: np.ndarray, s: np.ndarray) -> np.ndarray:
    """d(values)/ds on a non-uniform grid: central differences inside, cubic-fit
    one-sided stencils at the ends.

    The cubic endpoint stencil matters: a quadratic one-sided tangent is
    accurate enough by itself but its O(h^2) error divides by h when the
    tangent is differentiated again for the normal.
    """
    m = len(values)
    if m < 3:
        return np.gradient(values, s, axis=0, edge_order=1)
    out = np.gradient(values, s, axis=0, edge_order=2)
    if m >= 4:
        for idx, window in ((0, slice(0, 4)), (m - 1, slice(m - 4, m))):
            x = s[window] - s[idx]
            coef = np.linalg.solve(np.vander(x, 4, increasing=True), values[window])
            out[idx] = coef[1]
    return out


def _arc_second_derivative(values: np.ndarray, s: np.ndarray) -> np.ndarray:
    """d^2(values)/ds^2: three-point stencils inside, cubic-fit at the ends.

    Used for the normal direction: differentiating the already-differenced
    tangent field would amplify its O(h^2) bias into an O(h) boundary error,
    while second-differencing the exact positions stays O(h^2) everywhere.
    """
    m = len(values)
    out = np.zeros_like(values)
    if m < 3:
        return out
    h0 = (s[1:-1] - s[:-2])[:, None]
    h1 = (s[2:] - s[1:-1])[:, None]
    out[1:-1] = 2.0 * (values[:-2] * h1 - values[1:-1] * (h0 + h1) + values[2:] * h0) \
        / (h0 * h1 * (h0 + h1))
    if m >= 4:
        for idx, window in ((0, slice(0, 4)), (m - 1, slice(m - 4, m))):
            x = s[window] - s[idx]
            coef = np.linalg.solve(np.vander(x, 4, increasing=True), values[window])
            out[idx] = 2.0 * coef[2]
    else:
        out[0] = out[1]
        out[-1] = out[-2]
    return out


def compute_tnb(skeleton: Skeleton, straightness_eps: float = DEFAULT_STRAIGHTNESS_EPS) -> FramedSkeleton:
    """Per-vertex (t, n, b) frames from arc-length finite differences.

    Tangents come from second-order central differences of position with
    respect to arc length (one-sided at the endpoints); the normal direction
    from differences of the unit tangent. Where the curvature magnitude falls
    below straightness_eps the previous normal is parallel-transported into
    the plane perpendicular to the tangent (a fixed axis projection seeds the
    first vertex). Normals are sign-flipped to keep n_i . n_{i-1} >= 0 and
    b = t x n, so frames vary continuously along the skeleton.
    """
    v = skeleton.vertices
    s = skeleton.cum_arc
    m = len(v)
    t = _arc_derivative(v, s)
    t /= np.linalg.norm(t, axis=1)[:, None]
    # dT/ds == d^2r/ds^2 for an arc-length parameterization.
    dt = _arc_second_derivative(v, s)
    curvature = np.linalg.norm(dt, axis=1)

    n = np.empty_like(t)
    prev: Optional[np.ndarray] = None
    for i in range(m):
        cand = None
        if curvature[i] >= straightness_eps:
            # Orthogonalize against t so the residual stays at machine precision.
            cand = dt[i] - (dt[i] @ t[i]) * t[i]
            norm = np.linalg.norm(cand)
            cand = cand / norm if norm >= straightness_eps else None
        if cand is None:
            if prev is None:
                cand = _seed_normal(t[i])
            else:
                cand = prev - (prev @ t[i]) * t[i]
                norm = np.linalg.norm(cand)
                cand = cand / norm if norm > 1e-12 else _seed_normal(t[i])
        if prev is not None and cand @ prev < 0.0:
            cand = -cand
        n[i] = cand
        prev = cand

    b = np.cross(t, n)
    return FramedSkeleton(skeleton, t, n, b)


def nearest_vertex(p, skeleton: Skeleton) -> int:
    """Index of the skeleton vertex closest to p; exact ties go to the lowest index."""
    p = as_point3(p)
    diff = skeleton.vertices - p
    return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))


def _nearest_vertices(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Vectorized nearest-vertex indices with the lowest-index rule on exact ties."""
    tree = cKDTree(vertices)
    dist, idx = tree.query(points, k=2, workers=-1)
    out = idx[:, 0].astype(np.int64)
    tie = dist[:, 0] == dist[:, 1]
    if np.any(tie):
        out[tie] = np.minimum(idx[tie, 0], idx[tie, 1])
    return out


def forward_transform(cloud: PointCloud, fs: FramedSkeleton) -> CylindricalCloud:
    """Re-express a point cloud in cylindrical coordinates around the framed skeleton.

    For each point P with nearest vertex S_j: rho is |P - S_j|, g the
    cumulative arc length at j, and phi the angle of the NB-plane projection
    of P - S_j measured from n_j toward b_j, in [0, 2*pi). Projections shorter
    than AXIS_EPS get phi = 0. Labels pass through unchanged.
    """
    if len(cloud) == 0:
        raise EmptyCloud("cannot transform an empty cloud")
    sk = fs.skeleton
    j = _nearest_vertices(cloud.points, sk.vertices)
    u = cloud.points - sk.vertices[j]
    rho = np.linalg.norm(u, axis=1)
    g = sk.cum_arc[j]
    toff = np.einsum("ij,ij->i", u, fs.tangents[j])
    # v = [n_j, b_j][n_j, b_j]^T u has components (u.n_j, u.b_j) in the NB plane.
    a = np.einsum("ij,ij->i", u, fs.normals[j])
    c = np.einsum("ij,ij->i", u, fs.binormals[j])
    phi = np.arctan2(c, a)
    phi = np.where(phi < 0.0, phi + TWO_PI, phi)
    # 2*pi can be reached by rounding; it is the same azimuth as 0.
    phi = np.where(phi >= TWO_PI, 0.0, phi)
    phi = np.where(np.hypot(a, c) < AXIS_EPS, 0.0, phi)
    labels = None if cloud.labels is None else cloud.labels.copy()
    return CylindricalCloud(rho, phi, g, j, toff, labels=labels)


def inverse_transform(ccloud: CylindricalCloud, fs: FramedSkeleton) -> PointCloud:
    """Exact inverse of forward_transform.

    rho is the full distance to the vertex, so the in-plane radius is
    sqrt(rho^2 - tangential_offset^2); the tangential offset restores the
    component along t_j that (rho, phi, g) alone discards.
    """
    j = ccloud.vertex_index
    m = len(fs.skeleton)
    if len(j) and (j.min() < 0 or j.max() >= m):
        bad = j[(j < 0) | (j >= m)][0]
        raise IndexOutOfRange(f"vertex index {bad} outside [0, {m})")
    r_nb = np.sqrt(np.maximum(ccloud.rho**2 - ccloud.tangential_offset**2, 0.0))
    radial = np.cos(ccloud.phi)[:, None] * fs.normals[j] + np.sin(ccloud.phi)[:, None] * fs.binormals[j]
    pts = fs.skeleton.vertices[j] + r_nb[:, None] * radial + ccloud.tangential_offset[:, None] * fs.tangents[j]
    labels = None if ccloud.labels is None else ccloud.labels.copy()
    return PointCloud(pts, labels=labels)


def apply_rigid(obj: Union[PointCloud, Skeleton], xf: RigidTransform) -> Union[PointCloud, Skeleton]:
    """Apply p -> R p + t to every point or vertex; skeleton arc lengths are recomputed."""
    xf.validate()
    if isinstance(obj, PointCloud):
        labels = None if obj.labels is None else obj.labels.copy()
        return PointCloud(obj.points @ xf.rotation.T + xf.translation, labels=labels)
    if isinstance(obj, Skeleton):
        return compute_arc_length(obj.vertices @ xf.rotation.T + xf.translation)
    raise TypeError(
        f"apply_rigid supports PointCloud and Skeleton, not {type(obj).__name__}; "
        "recompute frames after moving a skeleton"
    )

"""Shared builders for skeletons, meshes, and reference frames used across tests."""

import numpy as np
import pytest

from gencyl import PointCloud, Skeleton, compute_arc_length, compute_tnb


def z_axis_skeleton(z_max=1.0, step=0.5):
    """Straight skeleton along +z with the canonical fallback frame."""
    z = np.arange(0.0, z_max + 1e-12, step)
    vertices = np.stack([np.zeros_like(z), np.zeros_like(z), z], axis=1)
    return compute_arc_length(vertices)


def helix_skeleton(turns=3.0, samples_per_turn=1000, a=1.0, b=1.0):
    t = np.linspace(0.0, 2.0 * np.pi * turns, int(turns * samples_per_turn) + 1)
    v = np.stack([a * np.cos(t), a * np.sin(t), b * t], axis=1)
    return compute_arc_length(v), t


def helix_frames_exact(t, a=1.0, b=1.0):
    """Closed-form unit tangent/normal/binormal of (a cos t, a sin t, b t)."""
    speed = np.hypot(a, b)
    tan = np.stack([-a * np.sin(t), a * np.cos(t), np.full_like(t, b)], axis=1) / speed
    nor = np.stack([-np.cos(t), -np.sin(t), np.zeros_like(t)], axis=1)
    bin_ = np.stack([b * np.sin(t), -b * np.cos(t), np.full_like(t, a)], axis=1) / speed
    return tan, nor, bin_


def arc_skeleton(theta0=-1.0, theta1=1.0, step=0.002, radius=1.0):
    th = np.arange(theta0, theta1 + 1e-12, step)
    v = np.stack([radius * np.cos(th), radius * np.sin(th), np.zeros_like(th)], axis=1)
    return compute_arc_length(v)


def random_walk_skeleton(rng, n=200, step=0.1):
    """Smooth open curve with varying curvature for property tests."""
    d = np.array([0.0, 0.0, 1.0])
    dirs = []
    for _ in range(n):
        dirs.append(d.copy())
        d = d + 0.25 * rng.normal(size=3)
        d /= np.linalg.norm(d)
    v = np.vstack([np.zeros(3), np.cumsum(step * np.asarray(dirs), axis=0)])
    return compute_arc_length(v)


def points_near_skeleton(rng, skeleton: Skeleton, n, radius=0.8):
    """Random points scattered in a tube around the skeleton."""
    idx = rng.integers(0, len(skeleton), n)
    offsets = rng.normal(scale=radius, size=(n, 3))
    return PointCloud(skeleton.vertices[idx] + offsets)


def max_angle(u, v):
    """Largest angle (radians) between row vectors, sign-insensitive."""
    dots = np.clip(np.abs(np.einsum("ij,ij->i", u, v)), 0.0, 1.0)
    return float(np.arccos(dots).max())


def frame_residual(fs):
    """Worst orthonormality / right-handedness violation across all frames."""
    t, n, b = fs.tangents, fs.normals, fs.binormals
    return max(
        np.abs(np.linalg.norm(t, axis=1) - 1.0).max(),
        np.abs(np.linalg.norm(n, axis=1) - 1.0).max(),
        np.abs(np.linalg.norm(b, axis=1) - 1.0).max(),
        np.abs(np.einsum("ij,ij->i", t, n)).max(),
        np.abs(np.einsum("ij,ij->i", t, b)).max(),
        np.abs(np.einsum("ij,ij->i", n, b)).max(),
        np.abs(b - np.cross(t, n)).max(),
    )


def cube_mesh(lo=0.0, hi=1.0):
    """Closed unit-cube triangle mesh with outward-oriented faces."""
    from gencyl import TriMesh

    v = np.array([
        [lo, lo, lo], [hi, lo, lo], [hi, hi, lo], [lo, hi, lo],
        [lo, lo, hi], [hi, lo, hi], [hi, hi, hi], [lo, hi, hi],
    ])
    f = np.array([
        [0, 2, 1], [0, 3, 2],          # bottom (z = lo), normal -z
        [4, 5, 6], [4, 6, 7],          # top, normal +z
        [0, 1, 5], [0, 5, 4],          # y = lo, normal -y
        [2, 3, 7], [2, 7, 6],          # y = hi, normal +y
        [1, 2, 6], [1, 6, 5],          # x = hi, normal +x
        [3, 0, 4], [3, 4, 7],          # x = lo, normal -x
    ])
    return TriMesh(v, f)


def convex_hull_mesh(rng, n=40):
    """Random closed convex mesh with outward orientation."""
    from scipy.spatial import ConvexHull

    from gencyl import TriMesh

    pts = rng.normal(size=(n, 3))
    hull = ConvexHull(pts)
    centroid = pts[np.unique(hull.simplices)].mean(axis=0)
    faces = []
    for simplex in hull.simplices:
        a, b, c = pts[simplex]
        normal = np.cross(b - a, c - a)
        if normal @ (a - centroid) < 0:
            simplex = simplex[[0, 2, 1]]
        faces.append(simplex)
    return TriMesh(pts, np.asarray(faces))


def ray_parity_inside(point, mesh, direction=None):
    """Ray-casting parity oracle: count triangle crossings of a ray from point."""
    direction = np.array([0.0, 0.0, 1.0]) if direction is None else direction
    v0 = mesh.vertices[mesh.faces[:, 0]]
    v1 = mesh.vertices[mesh.faces[:, 1]]
    v2 = mesh.vertices[mesh.faces[:, 2]]
    eps = 1e-12
    e1 = v1 - v0
    e2 = v2 - v0
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > eps
    inv = np.zeros_like(det)
    inv[ok] = 1.0 / det[ok]
    tvec = point - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = qvec @ direction * inv
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    hits = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > eps)
    return int(hits.sum()) % 2 == 1


@pytest.fixture
def rng():
    return np.random.default_rng(20240715)

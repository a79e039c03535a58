"""Synthetic generalized cylinders with ground truth, DSC evaluation, and rotation sweeps.

The tube generator samples the lateral surface of a tube swept along a line,
helix, or smoothed random walk (label 0) and plants capsule-shaped spines on
it (label 1), with every spine point strictly farther from the centerline
than the trunk radius so a radial threshold can separate the classes. The
rotation sweep re-runs the transform plus a supplied segmenter under random
rigid motions and reports per-class DSC, which is how the representation's
rotation invariance is checked end to end without any learned model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import BadSpec, LengthMismatch
from .geometry import (
    DEFAULT_STRAIGHTNESS_EPS,
    TWO_PI,
    CylindricalCloud,
    FramedSkeleton,
    PointCloud,
    RigidTransform,
    Skeleton,
    apply_rigid,
    compute_arc_length,
    compute_tnb,
    forward_transform,
    random_rotation,
    _seed_normal,
)

CENTERLINE_KINDS = ("line", "helix", "smoothed-random-walk")

# Spines start this fraction of the trunk radius above the surface so the
# strict separability invariant holds on curved centerlines too.
_SPINE_CLEARANCE = 0.05

Segmenter = Callable[[PointCloud, CylindricalCloud], np.ndarray]


@dataclass
class TubeSpec:
    """Recipe for a synthetic spiny tube; all randomness is driven by seed."""

    centerline_kind: str
    centerline_params: Dict[str, float]
    trunk_radius: float
    spine_count: int = 0
    spine_bump_radius: Tuple[float, float] = (0.05, 0.08)
    spine_length: Tuple[float, float] = (0.4, 0.6)
    noise_sigma: float = 0.0
    density: float = 400.0
    seed: int = 0
    skeleton_step: float = 0.1

    def __post_init__(self):
        if self.centerline_kind not in CENTERLINE_KINDS:
            raise BadSpec(f"centerline_kind must be one of {CENTERLINE_KINDS}")
        if self.trunk_radius <= 0 or self.density <= 0 or self.skeleton_step <= 0:
            raise BadSpec("trunk_radius, density and skeleton_step must be positive")
        if self.noise_sigma < 0:
            raise BadSpec("noise_sigma must be non-negative")
        if self.spine_count < 0:
            raise BadSpec("spine_count must be non-negative")
        if self.spine_count > 0:
            blo, bhi = self.spine_bump_radius
            llo, lhi = self.spine_length
            if not 0 < blo <= bhi:
                raise BadSpec("spine_bump_radius must be a positive (lo, hi) range")
            if not 0 < llo <= lhi:
                raise BadSpec("spine_length must be a positive (lo, hi) range")
            if llo <= self.trunk_radius:
                raise BadSpec("spine protrusion must exceed the trunk radius "
                              "(label separability)")
            if llo < 2.0 * bhi:
                raise BadSpec("spine protrusion must be at least twice the bump radius")


def _require(params: Dict[str, float], key: str, kind: str) -> float:
    if key not in params:
        raise BadSpec(f"{kind} centerline needs parameter {key!r}")
    return float(params[key])


def _resample_polyline(vertices: np.ndarray, cum: np.ndarray, step: float) -> np.ndarray:
    total = cum[-1]
    targets = np.arange(0.0, total + 1e-12, step)
    out = np.empty((len(targets), 3))
    for axis in range(3):
        out[:, axis] = np.interp(targets, cum, vertices[:, axis])
    return out


def _dense_centerline(spec: TubeSpec, rng: np.random.Generator) -> FramedSkeleton:
    """Finely sampled centerline with frames, step = skeleton_step / 4."""
    step = spec.skeleton_step / 4.0
    params = spec.centerline_params
    kind = spec.centerline_kind
    if kind == "line":
        length = _require(params, "length", kind)
        if length <= 0:
            raise BadSpec("line length must be positive")
        direction = np.array([
            params.get("direction_x", 0.0),
            params.get("direction_y", 0.0),
            params.get("direction_z", 1.0),
        ])
        direction /= np.linalg.norm(direction)
        s = np.arange(0.0, length + 1e-12, step)
        vertices = s[:, None] * direction
        skeleton = compute_arc_length(vertices)
        t = np.tile(direction, (len(s), 1))
        n = np.tile(_seed_normal(direction), (len(s), 1))
        return FramedSkeleton(skeleton, t, n, np.cross(t, n))
    if kind == "helix":
        a = _require(params, "radius", kind)
        b = _require(params, "pitch", kind)
        turns = _require(params, "turns", kind)
        if a <= 0 or turns <= 0 or b < 0:
            raise BadSpec("helix needs radius > 0, turns > 0, pitch >= 0")
        speed = np.hypot(a, b)
        u = np.arange(0.0, TWO_PI * turns + 1e-12, step / speed)
        vertices = np.stack([a * np.cos(u), a * np.sin(u), b * u], axis=1)
        t = np.stack([-a * np.sin(u), a * np.cos(u), np.full_like(u, b)], axis=1) / speed
        n = np.stack([-np.cos(u), -np.sin(u), np.zeros_like(u)], axis=1)
        return FramedSkeleton(compute_arc_length(vertices), t, n, np.cross(t, n))
    # smoothed random walk
    length = _require(params, "length", kind)
    if length <= 0:
        raise BadSpec("walk length must be positive")
    stride = float(params.get("step", 4.0 * spec.skeleton_step))
    jitter = float(params.get("jitter", 0.3))
    window = int(params.get("smooth_window", 5))
    n_steps = int(np.ceil(length / stride)) + 1
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    dirs = np.empty((n_steps, 3))
    for i in range(n_steps):
        dirs[i] = d
        d = d + jitter * rng.normal(size=3)
        d /= np.linalg.norm(d)
    raw = np.vstack([np.zeros(3), np.cumsum(stride * dirs, axis=0)])
    if window > 1:
        padded = np.pad(raw, ((window // 2, window - 1 - window // 2), (0, 0)), mode="edge")
        kernel = np.ones(window) / window
        raw = np.stack([np.convolve(padded[:, k], kernel, mode="valid") for k in range(3)], axis=1)
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(raw, axis=0), axis=1))])
    dense = _resample_polyline(raw, cum, step)
    return compute_tnb(compute_arc_length(dense))


def _frames_at(dense: FramedSkeleton, s: np.ndarray):
    """Position and orthonormalized frame interpolated at arc positions s."""
    cum = dense.skeleton.cum_arc
    v = dense.skeleton.vertices
    k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(cum) - 2)
    frac = ((s - cum[k]) / (cum[k + 1] - cum[k]))[:, None]
    pos = v[k] + frac * (v[k + 1] - v[k])
    t = (1 - frac) * dense.tangents[k] + frac * dense.tangents[k + 1]
    t /= np.linalg.norm(t, axis=1)[:, None]
    n = (1 - frac) * dense.normals[k] + frac * dense.normals[k + 1]
    n -= np.einsum("ij,ij->i", n, t)[:, None] * t
    n /= np.linalg.norm(n, axis=1)[:, None]
    return pos, t, n, np.cross(t, n)


def generate_tube(spec: TubeSpec) -> Tuple[PointCloud, Skeleton]:
    """Sample a labeled spiny tube surface plus its ground-truth skeleton.

    Trunk points (label 0) are area-weighted over the lateral surface; each
    spine (label 1) is a radial capsule whose surface starts strictly above
    the trunk. Deterministic given spec.seed.
    """
    rng = np.random.default_rng(spec.seed)
    dense = _dense_centerline(spec, rng)
    total = dense.skeleton.total_length
    r = spec.trunk_radius

    n_trunk = max(1, int(round(spec.density * TWO_PI * r * total)))
    s = rng.uniform(0.0, total, n_trunk)
    theta = rng.uniform(0.0, TWO_PI, n_trunk)
    pos, t, n, b = _frames_at(dense, s)
    radial = np.cos(theta)[:, None] * n + np.sin(theta)[:, None] * b
    chunks = [pos + r * radial]
    labels = [np.zeros(n_trunk, dtype=np.int64)]

    if spec.spine_count > 0:
        margin = spec.spine_length[1]
        if total <= 2.0 * margin:
            raise BadSpec("centerline too short for the requested spine length")
        h0 = _SPINE_CLEARANCE * r
        for _ in range(spec.spine_count):
            sk = rng.uniform(margin, total - margin)
            th = rng.uniform(0.0, TWO_PI)
            rb = rng.uniform(*spec.spine_bump_radius)
            ln = rng.uniform(*spec.spine_length)
            cpos, ct, cn, cb = _frames_at(dense, np.array([sk]))
            direction = np.cos(th) * cn[0] + np.sin(th) * cb[0]
            w1 = ct[0]
            w2 = np.cross(direction, w1)
            stem_lo, stem_hi = r + h0, r + ln - rb
            n_stem = max(1, int(round(spec.density * TWO_PI * rb * (stem_hi - stem_lo))))
            h = rng.uniform(stem_lo, stem_hi, n_stem)
            psi = rng.uniform(0.0, TWO_PI, n_stem)
            ring = np.cos(psi)[:, None] * w1 + np.sin(psi)[:, None] * w2
            chunks.append(cpos[0] + h[:, None] * direction + rb * ring)
            n_cap = max(1, int(round(spec.density * TWO_PI * rb * rb)))
            v = rng.normal(size=(n_cap, 3))
            v /= np.linalg.norm(v, axis=1)[:, None]
            flip = v @ direction < 0
            v[flip] = -v[flip]
            chunks.append(cpos[0] + stem_hi * direction + rb * v)
            labels.append(np.ones(n_stem + n_cap, dtype=np.int64))

    points = np.vstack(chunks)
    if spec.noise_sigma > 0.0:
        points = points + rng.normal(0.0, spec.noise_sigma, points.shape)
    gt = compute_arc_length(
        _resample_polyline(dense.skeleton.vertices, dense.skeleton.cum_arc, spec.skeleton_step)
    )
    return PointCloud(points, labels=np.concatenate(labels)), gt


@dataclass
class EvalReport:
    """Per-class DSC for one evaluation run, with the configuration echoed back."""

    dsc_per_class: Dict[int, float]
    n_points: int
    config: Dict[str, str] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        for cls, value in self.dsc_per_class.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"DSC for class {cls} outside [0, 1]: {value}")


def write_report(report: EvalReport, path):
    """Flat key:value serialization, one report per file."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"n_points: {report.n_points}\n")
        fh.write(f"seed: {report.seed}\n")
        for key in sorted(report.config):
            fh.write(f"config.{key}: {report.config[key]}\n")
        for cls in sorted(report.dsc_per_class):
            fh.write(f"dsc.{cls}: {report.dsc_per_class[cls]:.17g}\n")


def dice(pred, gt, cls: int) -> float:
    """Dice similarity 2|P & G| / (|P| + |G|) for one class; 1.0 when both sets are empty."""
    pred = np.asarray(pred, dtype=np.int64)
    gt = np.asarray(gt, dtype=np.int64)
    if pred.shape != gt.shape:
        raise LengthMismatch(f"pred has {pred.shape}, gt has {gt.shape}")
    p = pred == cls
    g = gt == cls
    denom = int(p.sum()) + int(g.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int(np.logical_and(p, g).sum()) / denom


def rho_threshold_segmenter(ccloud: CylindricalCloud, rho_cut: float) -> np.ndarray:
    """Geometric baseline: label 1 wherever the radial coordinate exceeds rho_cut."""
    return (ccloud.rho > rho_cut).astype(np.int64)


def z_threshold_segmenter(cloud: PointCloud, z_cut: float) -> np.ndarray:
    """Deliberately rotation-sensitive strawman: label 1 above a Cartesian z plane."""
    return (cloud.points[:, 2] > z_cut).astype(np.int64)


def default_rho_cut(rho: np.ndarray) -> float:
    """Unattended threshold: 1.25x the median radial coordinate (the trunk radius, roughly)."""
    return 1.25 * float(np.median(rho))


def rotation_sweep(cloud: PointCloud, skeleton: Skeleton, n_rotations: int, seed: int,
                   segmenter: Optional[Segmenter] = None, rho_cut: Optional[float] = None,
                   include_identity: bool = False,
                   straightness_eps: float = DEFAULT_STRAIGHTNESS_EPS) -> List[EvalReport]:
    """Re-run transform + segmenter under seeded random rigid motions; DSC per rotation.

    The cloud's labels are the ground truth. With include_identity the first
    motion is the identity (the random draw still happens, keeping the rest
    of the sweep independent of the flag). The default segmenter is the
    radial threshold at rho_cut.
    """
    if n_rotations < 1:
        raise ValueError("n_rotations must be at least 1")
    if cloud.labels is None:
        raise ValueError("rotation_sweep needs ground-truth labels on the cloud")
    if segmenter is None:
        if rho_cut is None:
            raise ValueError("provide a segmenter or a rho_cut for the default baseline")
        cut = float(rho_cut)

        def segmenter(_cloud, ccloud, _cut=cut):
            return rho_threshold_segmenter(ccloud, _cut)

    rng = np.random.default_rng(seed)
    extent = float(np.linalg.norm(cloud.points.max(axis=0) - cloud.points.min(axis=0)))
    classes = sorted(int(c) for c in np.unique(cloud.labels))
    reports = []
    for i in range(n_rotations):
        rot = random_rotation(rng)
        shift = rng.uniform(-1.0, 1.0, 3) * extent
        if include_identity and i == 0:
            xf = RigidTransform.identity()
        else:
            xf = RigidTransform(rot, shift)
        moved_cloud = apply_rigid(cloud, xf)
        moved_skeleton = apply_rigid(skeleton, xf)
        ccloud = forward_transform(moved_cloud, compute_tnb(moved_skeleton, straightness_eps))
        pred = np.asarray(segmenter(moved_cloud, ccloud), dtype=np.int64)
        report = EvalReport(
            dsc_per_class={cls: dice(pred, cloud.labels, cls) for cls in classes},
            n_points=len(cloud),
            config={"rotation": str(i), "n_rotations": str(n_rotations)},
            seed=seed,
        )
        reports.append(report)
    return reports

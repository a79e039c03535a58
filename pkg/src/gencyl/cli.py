"""Command-line surface: each pipeline stage individually plus the end-to-end run.

Exit codes: 0 success, 1 usage/config error, 2 data error. Diagnostics go to
stderr; data is only ever written to the declared output paths. Every
subcommand is deterministic given its config and seed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import io
from .errors import EmptyCloud, GencylError
from .geometry import (
    DEFAULT_STRAIGHTNESS_EPS,
    FramedSkeleton,
    PointCloud,
    Skeleton,
    compute_arc_length,
    compute_tnb,
    forward_transform,
    inverse_transform,
)
from .harness import (
    EvalReport,
    TubeSpec,
    default_rho_cut,
    dice,
    generate_tube,
    rho_threshold_segmenter,
    rotation_sweep,
    write_report,
)
from .sampling import Fragment, assemble_prediction, fragment_cloud, make_batches, remap_to_volume
from .skeletonize import (
    SkeletonGraph,
    SkeletonizeParams,
    cover_paths,
    l1_skeletonize,
    prune_short_branches,
    select_dendrite_path,
    spanning_forest,
)


class ConfigError(Exception):
    """Bad config file or option combination; reported as a usage error (exit 1)."""


@dataclass
class PipelineConfig:
    """Every stage parameter; zeros mean 'derive from the data' where noted."""

    seed: int = 0
    policy: str = "dendrite"
    batch_size: int = 30000
    window_len: float = 0.0        # 0: total arc length / 8
    overlap_frac: float = 0.25
    rho_cut: float = 0.0           # 0: 1.25 x median radial coordinate
    min_branch_len: float = 0.0
    resolution: float = 1.0
    threshold: float = 0.5
    num_seeds: int = 0             # 0: max(32, n/500)
    neighborhood_radius: float = 0.0  # 0: 20 x median point spacing
    repulsion_weight: float = 0.35
    max_iters: int = 100
    straightness_eps: float = DEFAULT_STRAIGHTNESS_EPS

    def __post_init__(self):
        if self.policy not in ("dendrite", "artery"):
            raise ConfigError(f"policy must be 'dendrite' or 'artery', got {self.policy!r}")
        if self.batch_size <= 0:
            raise ConfigError("batch_size must be positive")
        if not 0.0 <= self.overlap_frac < 1.0:
            raise ConfigError("overlap_frac must be in [0, 1)")


_CONFIG_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _parse_kv_file(path) -> Dict[str, str]:
    out: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected 'key: value'")
            key, value = line.split(":", 1)
            key = key.strip()
            if key in out:
                raise ConfigError(f"{path}: line {lineno}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


def load_config(path) -> PipelineConfig:
    """Flat key:value config; unknown keys are rejected."""
    raw = _parse_kv_file(path)
    values = {}
    for key, text in raw.items():
        if key not in _CONFIG_TYPES:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        caster = int if _CONFIG_TYPES[key] in ("int", int) else (
            float if _CONFIG_TYPES[key] in ("float", float) else str)
        try:
            values[key] = caster(text)
        except ValueError:
            raise ConfigError(f"{path}: bad value for {key!r}: {text!r}") from None
    return PipelineConfig(**values)


def save_config(cfg: PipelineConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        for f in fields(PipelineConfig):
            fh.write(f"{f.name}: {getattr(cfg, f.name)}\n")


def _merge_flags(cfg: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    """Command-line flags override config-file values."""
    overrides = {}
    for f in fields(PipelineConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    if not overrides:
        return cfg
    current = {f.name: getattr(cfg, f.name) for f in fields(PipelineConfig)}
    current.update(overrides)
    return PipelineConfig(**current)


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    return _merge_flags(cfg, args)


_TUBESPEC_SCALARS = {
    "kind": str,
    "trunk_radius": float,
    "spine_count": int,
    "noise_sigma": float,
    "density": float,
    "seed": int,
    "skeleton_step": float,
}


def load_tubespec(path) -> TubeSpec:
    """TubeSpec from a flat key:value file; centerline parameters use a 'param.' prefix."""
    raw = _parse_kv_file(path)
    scalars: Dict[str, object] = {}
    params: Dict[str, float] = {}
    ranges: Dict[str, Tuple[float, float]] = {}
    for key, text in raw.items():
        if key.startswith("param."):
            try:
                params[key[len("param."):]] = float(text)
            except ValueError:
                raise ConfigError(f"{path}: bad value for {key!r}: {text!r}") from None
        elif key in ("spine_bump_radius", "spine_length"):
            parts = text.split()
            if len(parts) != 2:
                raise ConfigError(f"{path}: {key} needs two values 'lo hi'")
            ranges[key] = (float(parts[0]), float(parts[1]))
        elif key in _TUBESPEC_SCALARS:
            try:
                scalars[key] = _TUBESPEC_SCALARS[key](text)
            except ValueError:
                raise ConfigError(f"{path}: bad value for {key!r}: {text!r}") from None
        else:
            raise ConfigError(f"{path}: unknown tube-spec key {key!r}")
    if "kind" not in scalars:
        raise ConfigError(f"{path}: missing 'kind'")
    if "trunk_radius" not in scalars:
        raise ConfigError(f"{path}: missing 'trunk_radius'")
    kind = scalars.pop("kind")
    return TubeSpec(centerline_kind=kind, centerline_params=params, **scalars, **ranges)


# --------------------------------------------------------------------------
# Shared loading helpers
# --------------------------------------------------------------------------

def _graph_as_path(graph: SkeletonGraph) -> Optional[Skeleton]:
    """The skeleton for a graph that is one simple open path, else None."""
    m = len(graph)
    if m < 2 or len(graph.edges) != m - 1:
        return None
    deg = graph.degrees()
    ends = np.nonzero(deg == 1)[0]
    if len(ends) != 2 or deg.max() > 2 or deg.min() < 1:
        return None
    adj: Dict[int, List[int]] = {i: [] for i in range(m)}
    for i, j in graph.sorted_edges():
        adj[i].append(j)
        adj[j].append(i)
    order = [int(ends.min())]
    prev = -1
    while len(order) < m:
        nxt = [v for v in adj[order[-1]] if v != prev]
        if not nxt:
            return None
        prev = order[-1]
        order.append(nxt[0])
    return compute_arc_length(graph.vertices[order])


def _path_skeleton_from_swc(path) -> Skeleton:
    graph = io.load_swc(path)
    skeleton = _graph_as_path(graph)
    if skeleton is None:
        print(f"gencyl: {path} is not a simple path; selecting the dendrite path",
              file=sys.stderr)
        skeleton = select_dendrite_path(graph)
    return skeleton


def _load_framed(path, straightness_eps: float) -> FramedSkeleton:
    """Frames file or SWC path; SWC skeletons get frames recomputed."""
    if str(path).endswith(".swc"):
        return compute_tnb(_path_skeleton_from_swc(path), straightness_eps)
    return io.load_frames(path)


def _skeleton_to_graph(skeleton: Skeleton) -> SkeletonGraph:
    edges = {(i, i + 1) for i in range(len(skeleton) - 1)}
    return SkeletonGraph(skeleton.vertices, edges)


def _load_any_labels(path) -> np.ndarray:
    """Labels from a label file, a labeled cloud, a cylindrical cloud, or a volume."""
    if Path(str(path) + ".meta").exists():
        return io.load_volume(path).data.ravel().astype(np.int64)
    with open(path, "r", encoding="utf-8") as fh:
        ncols = 0
        for raw in fh:
            line = raw.strip()
            if line and not line.startswith("#"):
                ncols = len(line.split())
                break
    if ncols == 1:
        return io.load_labels(path)
    if ncols == 4:
        cloud = io.load_pointcloud(path)
        if cloud.labels is None:
            raise GencylError(f"{path}: no label column")
        return cloud.labels
    if ncols == 6:
        ccloud = io.load_cylindrical(path)
        if ccloud.labels is None:
            raise GencylError(f"{path}: no label column")
        return ccloud.labels
    raise GencylError(f"{path}: cannot extract labels from a {ncols}-column file")


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def _cmd_synth(args) -> None:
    spec = load_tubespec(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    cloud, skeleton = generate_tube(spec)
    io.save_pointcloud(cloud, args.out_cloud)
    io.save_swc(_skeleton_to_graph(skeleton), args.out_skeleton)
    print(f"gencyl synth: {len(cloud)} points, {len(skeleton)} skeleton vertices",
          file=sys.stderr)
    if args.out_volume:
        res = args.resolution if args.resolution is not None else 1.0
        lo = cloud.points.min(axis=0) - 2 * res
        hi = cloud.points.max(axis=0) + 2 * res
        shape = tuple(int(np.ceil((hi[i] - lo[i]) / res)) for i in range(3))
        grid = io.VolumeGrid(shape, (res, res, res), lo, np.zeros(shape, dtype=np.int64))
        vol = remap_to_volume(cloud, cloud.labels + 1, grid)
        io.save_volume(vol, args.out_volume)
        print(f"gencyl synth: volume {shape} at resolution {res}", file=sys.stderr)


def _skeletonize_params(cfg: PipelineConfig, points: np.ndarray) -> SkeletonizeParams:
    return SkeletonizeParams.for_cloud(
        points,
        num_seeds=cfg.num_seeds,
        neighborhood_radius=cfg.neighborhood_radius,
        repulsion_weight=cfg.repulsion_weight,
        max_iters=cfg.max_iters,
    )


def _cmd_skeletonize(args) -> None:
    cfg = _config_from_args(args)
    cloud = io.load_pointcloud(args.input)
    params = _skeletonize_params(cfg, cloud.points)
    graph = l1_skeletonize(cloud, params, cfg.seed)
    diag = graph.diagnostics
    print(f"gencyl skeletonize: {len(graph)} vertices, {len(graph.edges)} edges, "
          f"converged={diag.get('converged')} after {diag.get('iterations')} iterations",
          file=sys.stderr)
    forest = spanning_forest(graph)
    if len(forest.edges) != len(graph.edges):
        print(f"gencyl skeletonize: broke {len(graph.edges) - len(forest.edges)} cycle "
              f"edge(s) for SWC output", file=sys.stderr)
    io.save_swc(forest, args.out)


def _cmd_frames(args) -> None:
    cfg = _config_from_args(args)
    skeleton = _path_skeleton_from_swc(args.input)
    io.save_frames(compute_tnb(skeleton, cfg.straightness_eps), args.out)


def _cmd_transform(args) -> None:
    cfg = _config_from_args(args)
    cloud = io.load_pointcloud(args.input)
    fs = _load_framed(args.skeleton, cfg.straightness_eps)
    io.save_cylindrical(forward_transform(cloud, fs), args.out)


def _cmd_inverse(args) -> None:
    cfg = _config_from_args(args)
    ccloud = io.load_cylindrical(args.input)
    fs = _load_framed(args.skeleton, cfg.straightness_eps)
    io.save_pointcloud(inverse_transform(ccloud, fs), args.out)


def _cmd_fragment(args) -> None:
    cfg = _config_from_args(args)
    ccloud = io.load_cylindrical(args.input)
    fs = _load_framed(args.skeleton, cfg.straightness_eps)
    window = cfg.window_len if cfg.window_len > 0 else fs.skeleton.total_length / 8.0
    frags = fragment_cloud(ccloud, fs.skeleton, window, cfg.overlap_frac)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("# g_lo g_hi vertex_start vertex_end n_points point_indices...\n")
        for f in frags:
            head = (f"{f.window[0]:.17g} {f.window[1]:.17g} {f.skeleton_range[0]} "
                    f"{f.skeleton_range[1]} {len(f)}")
            tail = " ".join(str(int(i)) for i in f.point_indices)
            fh.write(head + (" " + tail if tail else "") + "\n")
    print(f"gencyl fragment: {len(frags)} windows of length {window:.6g}", file=sys.stderr)


def _cmd_voxelize(args) -> None:
    cfg = _config_from_args(args)
    mesh = io.load_obj(args.input)
    shape, voxel_size, origin = io.grid_for_mesh(mesh, cfg.resolution)
    vol = io.voxelize_mesh(mesh, shape, voxel_size, origin, cfg.threshold)
    io.save_volume(vol, args.out)
    print(f"gencyl voxelize: grid {shape}, {int(np.count_nonzero(vol.data))} interior voxels",
          file=sys.stderr)


def _cmd_points(args) -> None:
    vol = io.load_volume(args.input)
    foreground = None
    if args.foreground:
        foreground = [int(tok) for tok in args.foreground.split(",")]
    io.save_pointcloud(io.volume_to_points(vol, foreground), args.out)


def _cmd_segment_baseline(args) -> None:
    cfg = _config_from_args(args)
    ccloud = io.load_cylindrical(args.input)
    cut = cfg.rho_cut if cfg.rho_cut > 0 else default_rho_cut(ccloud.rho)
    print(f"gencyl segment-baseline: rho_cut = {cut:.6g}", file=sys.stderr)
    io.save_labels(rho_threshold_segmenter(ccloud, cut), args.out)


def _cmd_evaluate(args) -> None:
    pred = _load_any_labels(args.pred)
    gt = _load_any_labels(args.gt)
    classes = [int(tok) for tok in args.cls.split(",")] if args.cls else \
        sorted(int(c) for c in np.unique(gt))
    report = EvalReport(
        dsc_per_class={cls: dice(pred, gt, cls) for cls in classes},
        n_points=len(gt),
        config={"pred": str(args.pred), "gt": str(args.gt)},
        seed=0,
    )
    write_report(report, args.out)
    for cls in classes:
        print(f"gencyl evaluate: dsc[{cls}] = {report.dsc_per_class[cls]:.6g}",
              file=sys.stderr)


def _cmd_sweep_rotations(args) -> None:
    cfg = _config_from_args(args)
    cloud = io.load_pointcloud(args.input)
    if cloud.labels is None:
        raise GencylError(f"{args.input}: sweep needs ground-truth labels (4-column cloud)")
    if str(args.skeleton).endswith(".swc"):
        skeleton = _path_skeleton_from_swc(args.skeleton)
    else:
        skeleton = io.load_frames(args.skeleton).skeleton
    if cfg.rho_cut > 0:
        cut = cfg.rho_cut
    else:
        base = forward_transform(cloud, compute_tnb(skeleton, cfg.straightness_eps))
        cut = default_rho_cut(base.rho)
    reports = rotation_sweep(cloud, skeleton, args.n_rotations, cfg.seed, rho_cut=cut,
                             straightness_eps=cfg.straightness_eps)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, report in enumerate(reports):
        write_report(report, out_dir / f"rotation_{i:03d}.txt")
    classes = sorted(reports[0].dsc_per_class)
    with open(out_dir / "summary.txt", "w", encoding="utf-8") as fh:
        fh.write(f"n_rotations: {len(reports)}\n")
        fh.write(f"seed: {cfg.seed}\n")
        fh.write(f"rho_cut: {cut:.17g}\n")
        for cls in classes:
            values = [r.dsc_per_class[cls] for r in reports]
            fh.write(f"dsc_min.{cls}: {min(values):.17g}\n")
            fh.write(f"dsc_max.{cls}: {max(values):.17g}\n")
            fh.write(f"dsc_spread.{cls}: {max(values) - min(values):.17g}\n")
    print(f"gencyl sweep-rotations: {len(reports)} rotations written to {out_dir}",
          file=sys.stderr)


def run_pipeline(vol: io.VolumeGrid, cfg: PipelineConfig) -> Tuple[PointCloud, np.ndarray, io.VolumeGrid]:
    """Volume in, predicted labels and labeled volume out (the CLI 'pipeline' core).

    Steps: voxel indexing, skeletonization, policy path selection, frames,
    transform, fragmenting, fixed-size batching, radial-threshold baseline
    per batch, majority voting, and remapping votes onto the input grid.
    Output voxel labels are class + 1 so background stays 0.
    """
    cloud = io.volume_to_points(vol)
    if len(cloud) == 0:
        raise EmptyCloud("input volume has no foreground voxels")
    graph = l1_skeletonize(cloud, _skeletonize_params(cfg, cloud.points), cfg.seed)
    # The contraction graph is cycle-bound; path policies need it cut first.
    graph = spanning_forest(graph)
    if cfg.policy == "dendrite":
        if cfg.min_branch_len > 0:
            graph = prune_short_branches(graph, cfg.min_branch_len)
        skeletons = [select_dendrite_path(graph)]
    else:
        skeletons = cover_paths(graph, cfg.min_branch_len)
        if not skeletons:
            raise EmptyCloud("skeleton graph has no edges to cover")
    framed = [compute_tnb(sk, cfg.straightness_eps) for sk in skeletons]
    clouds = [forward_transform(cloud, fs) for fs in framed]
    assign = np.argmin(np.stack([cc.rho for cc in clouds]), axis=0)

    batches = []
    batch_labels = []
    for pi, (fs, cc) in enumerate(zip(framed, clouds)):
        mine = assign == pi
        if not mine.any():
            continue
        cut = cfg.rho_cut if cfg.rho_cut > 0 else default_rho_cut(cc.rho[mine])
        window = cfg.window_len if cfg.window_len > 0 else fs.skeleton.total_length / 8.0
        for frag in fragment_cloud(cc, fs.skeleton, window, cfg.overlap_frac):
            keep = frag.point_indices[mine[frag.point_indices]]
            if len(keep) == 0:
                continue
            sub = Fragment(keep, frag.skeleton_range, frag.window)
            for batch in make_batches(sub, cfg.batch_size, cfg.seed + len(batches),
                                      fragment_index=len(batches)):
                batches.append(batch)
                batch_labels.append(rho_threshold_segmenter(cc, cut)[batch.point_indices])
    pred = assemble_prediction(len(cloud), batches, batch_labels)
    out = remap_to_volume(cloud, pred + 1, vol)
    return cloud, pred, out


def _cmd_pipeline(args) -> None:
    cfg = _config_from_args(args)
    if str(args.input).endswith(".obj"):
        mesh = io.load_obj(args.input)
        shape, voxel_size, origin = io.grid_for_mesh(mesh, cfg.resolution)
        vol = io.voxelize_mesh(mesh, shape, voxel_size, origin, cfg.threshold)
        print(f"gencyl pipeline: voxelized {args.input} into grid {shape}", file=sys.stderr)
    else:
        vol = io.load_volume(args.input)
    cloud, pred, out = run_pipeline(vol, cfg)
    io.save_volume(out, args.out)
    counts = {int(c): int(k) for c, k in zip(*np.unique(pred, return_counts=True))}
    print(f"gencyl pipeline: {len(cloud)} points, predicted class counts {counts}",
          file=sys.stderr)


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_config_flags(sub: argparse.ArgumentParser, *names: str) -> None:
    flags = {
        "seed": (("--seed",), dict(type=int)),
        "policy": (("--policy",), dict(choices=("dendrite", "artery"))),
        "batch_size": (("--batch-size",), dict(type=int)),
        "window_len": (("--window-len",), dict(type=float)),
        "overlap_frac": (("--overlap",), dict(type=float)),
        "rho_cut": (("--rho-cut",), dict(type=float)),
        "min_branch_len": (("--min-branch-len",), dict(type=float)),
        "resolution": (("--resolution",), dict(type=float)),
        "threshold": (("--threshold",), dict(type=float)),
        "num_seeds": (("--num-seeds",), dict(type=int)),
        "neighborhood_radius": (("--neighborhood-radius",), dict(type=float)),
        "repulsion_weight": (("--repulsion-weight",), dict(type=float)),
        "max_iters": (("--max-iters",), dict(type=int)),
        "straightness_eps": (("--straightness-eps",), dict(type=float)),
    }
    sub.add_argument("--config", help="flat key:value config file; flags override it")
    for name in names:
        args, kwargs = flags[name]
        sub.add_argument(*args, dest=name, default=None, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gencyl", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command")

    p = subs.add_parser("synth", parents=[], help="generate a synthetic labeled tube")
    p.add_argument("--spec", required=True, help="tube-spec key:value file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-cloud", required=True)
    p.add_argument("--out-skeleton", required=True)
    p.add_argument("--out-volume", default=None)
    p.add_argument("--resolution", type=float, default=None)
    p.set_defaults(func=_cmd_synth)

    p = subs.add_parser("skeletonize", help="point cloud to SWC skeleton graph")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, "seed", "num_seeds", "neighborhood_radius", "repulsion_weight",
                      "max_iters")
    p.set_defaults(func=_cmd_skeletonize)

    p = subs.add_parser("frames", help="SWC path to framed-skeleton text")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, "straightness_eps")
    p.set_defaults(func=_cmd_frames)

    p = subs.add_parser("transform", help="cloud + skeleton to cylindrical coordinates")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--skeleton", required=True, help="frames text or SWC path")
    p.add_argument("--out", required=True)
    _add_config_flags(p, "straightness_eps")
    p.set_defaults(func=_cmd_transform)

    p = subs.add_parser("inverse", help="cylindrical coordinates back to a cloud")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--skeleton", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, "straightness_eps")
    p.set_defaults(func=_cmd_inverse)

    p = subs.add_parser("fragment", help="window the transformed cloud along the skeleton")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--skeleton", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, "window_len", "overlap_frac", "straightness_eps")
    p.set_defaults(func=_cmd_fragment)

    p = subs.add_parser("voxelize", help="OBJ mesh to a label volume (winding numbers)")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, "resolution", "threshold")
    p.set_defaults(func=_cmd_voxelize)

    p = subs.add_parser("points", help="label volume to a point cloud (voxel indexing)")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--foreground", default=None, help="comma-separated labels; default nonzero")
    p.set_defaults(func=_cmd_points)

    p = subs.add_parser("segment-baseline", help="radial-threshold labels from cylindrical cloud")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, "rho_cut")
    p.set_defaults(func=_cmd_segment_baseline)

    p = subs.add_parser("evaluate", help="DSC of predicted vs ground-truth labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--cls", default=None, help="comma-separated classes; default all in gt")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = subs.add_parser("sweep-rotations", help="DSC stability under random rigid motions")
    p.add_argument("--in", dest="input", required=True, help="labeled cloud (4 columns)")
    p.add_argument("--skeleton", required=True)
    p.add_argument("--n", dest="n_rotations", type=int, default=20)
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p, "seed", "rho_cut", "straightness_eps")
    p.set_defaults(func=_cmd_sweep_rotations)

    p = subs.add_parser("pipeline", help="volume or mesh in, labeled volume out")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, "seed", "policy", "batch_size", "window_len", "overlap_frac",
                      "rho_cut", "min_branch_len", "resolution", "threshold", "num_seeds",
                      "neighborhood_radius", "repulsion_weight", "max_iters",
                      "straightness_eps")
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 1
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"gencyl {args.command}: {exc}", file=sys.stderr)
        return 1
    except (GencylError, OSError, ValueError) as exc:
        print(f"gencyl {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Curve-skeleton extraction and sampling-path selection.

The skeletonizer contracts a farthest-point-sampled subset of the cloud onto
the local L1 medians (Weiszfeld iterations within a fixed-radius
neighborhood, plus a repulsion term that spreads the samples along the
structure), then links nearby samples into an undirected graph. Path policies
turn that graph into sampling trajectories: the dendrite policy picks the
single leaf-to-leaf path passing the most junctions, the artery policy covers
the pruned graph with greedily extracted longest paths.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from .errors import NoLeaves, TooFewPoints
from .geometry import PointCloud, Skeleton, as_points, compute_arc_length

log = logging.getLogger(__name__)

_WEISZFELD_EPS = 1e-12


@dataclass
class SkeletonizeParams:
    """Hyperparameters of the L1-median contraction.

    neighborhood_radius is the attraction radius h; samples closer than
    edge_radius get linked into the output graph.
    """

    num_seeds: int
    neighborhood_radius: float
    repulsion_weight: float = 0.35
    max_iters: int = 100
    convergence_tol: float = 0.0
    edge_radius: float = 0.0

    def __post_init__(self):
        if self.num_seeds <= 0:
            raise ValueError("num_seeds must be positive")
        if self.neighborhood_radius <= 0:
            raise ValueError("neighborhood_radius must be positive")
        if self.repulsion_weight < 0:
            raise ValueError("repulsion_weight must be non-negative")
        if self.max_iters <= 0:
            raise ValueError("max_iters must be positive")
        if self.convergence_tol == 0.0:
            self.convergence_tol = 1e-4 * self.neighborhood_radius
        if self.edge_radius == 0.0:
            self.edge_radius = 2.0 * self.neighborhood_radius
        if self.convergence_tol <= 0 or self.edge_radius <= 0:
            raise ValueError("convergence_tol and edge_radius must be positive")

    @classmethod
    def for_cloud(cls, points, num_seeds: int = 0, neighborhood_radius: float = 0.0,
                  **kwargs) -> "SkeletonizeParams":
        """Defaults scaled to the cloud: h = 20x the median nearest-neighbor spacing."""
        pts = as_points(points)
        n = len(pts)
        if num_seeds <= 0:
            num_seeds = max(32, n // 500)
        if neighborhood_radius <= 0.0:
            sample = pts if n <= 5000 else pts[:: n // 5000 + 1]
            d, _ = cKDTree(pts).query(sample, k=2, workers=-1)
            spacing = float(np.median(d[:, 1]))
            neighborhood_radius = 20.0 * max(spacing, 1e-12)
        return cls(num_seeds=num_seeds, neighborhood_radius=neighborhood_radius, **kwargs)


@dataclass
class SkeletonGraph:
    """Undirected graph of 3D vertices; edges are sorted index pairs.

    radii rides along for SWC exchange; diagnostics carries per-operation
    notes such as the contraction convergence flag.
    """

    vertices: np.ndarray
    edges: Set[Tuple[int, int]]
    radii: Optional[np.ndarray] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = as_points(self.vertices)
        m = len(self.vertices)
        clean = set()
        for e in self.edges:
            i, j = int(e[0]), int(e[1])
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < m and 0 <= j < m):
                raise ValueError(f"edge ({i}, {j}) outside vertex range [0, {m})")
            clean.add((min(i, j), max(i, j)))
        self.edges = clean
        if self.radii is not None:
            self.radii = np.asarray(self.radii, dtype=np.float64)
            if self.radii.shape != (m,):
                raise ValueError("radii length must match vertex count")

    def __len__(self) -> int:
        return len(self.vertices)

    def sorted_edges(self) -> List[Tuple[int, int]]:
        return sorted(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(len(self.vertices), dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def edge_length(self, i: int, j: int) -> float:
        return float(np.linalg.norm(self.vertices[i] - self.vertices[j]))

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(len(self.vertices)))
        for i, j in self.sorted_edges():
            g.add_edge(i, j, weight=self.edge_length(i, j))
        return g

    def subgraph(self, keep: Sequence[int]) -> "SkeletonGraph":
        """Re-indexed copy restricted to `keep` (edges with both ends kept survive)."""
        keep = sorted(int(k) for k in keep)
        remap = {old: new for new, old in enumerate(keep)}
        edges = {
            (remap[i], remap[j]) for i, j in self.edges if i in remap and j in remap
        }
        radii = None if self.radii is None else self.radii[keep]
        return SkeletonGraph(self.vertices[keep], edges, radii=radii,
                             diagnostics=dict(self.diagnostics))


def spanning_forest(graph: SkeletonGraph) -> SkeletonGraph:
    """Cut every cycle at its longest edge (minimum spanning forest).

    Path policies require graphs with leaves; the dense contraction graph is
    cycle-bound, so pipelines cut it with this before selecting paths.
    """
    nxg = graph.to_networkx()
    if nxg.number_of_edges() == len(graph) - nx.number_connected_components(nxg):
        return graph
    # minimum_spanning_tree yields a spanning forest on disconnected graphs
    mst = nx.minimum_spanning_tree(nxg, weight="weight")
    edges = {(min(u, v), max(u, v)) for u, v in mst.edges}
    return SkeletonGraph(graph.vertices, edges, radii=graph.radii,
                         diagnostics=dict(graph.diagnostics))


def farthest_point_indices(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k indices chosen by farthest-point sampling; the seed point comes from rng."""
    n = len(points)
    out = np.empty(k, dtype=np.int64)
    out[0] = rng.integers(n)
    dist = np.linalg.norm(points - points[out[0]], axis=1)
    for i in range(1, k):
        out[i] = int(np.argmax(dist))
        dist = np.minimum(dist, np.linalg.norm(points - points[out[i]], axis=1))
    return out


def _contract_step(samples: np.ndarray, cloud_tree: cKDTree, cloud_pts: np.ndarray,
                   params: SkeletonizeParams) -> np.ndarray:
    """One simultaneous update: Weiszfeld pull toward the local L1 median plus repulsion."""
    h = params.neighborhood_radius
    neighborhoods = cloud_tree.query_ball_point(samples, r=h, workers=-1)
    new = samples.copy()
    for k, idx in enumerate(neighborhoods):
        if not idx:
            continue
        q = cloud_pts[sorted(idx)]
        d = np.linalg.norm(q - samples[k], axis=1)
        # Weiszfeld singularity: a sample sitting exactly on a datum would pin
        # itself with infinite weight, so coincident points are dropped.
        keep = d > _WEISZFELD_EPS
        if not keep.any():
            continue
        w = 1.0 / d[keep]
        new[k] = (w[:, None] * q[keep]).sum(axis=0) / w.sum()

    if params.repulsion_weight > 0.0 and len(samples) > 1:
        sample_tree = cKDTree(samples)
        near = sample_tree.query_ball_point(samples, r=h, workers=-1)
        for k, idx in enumerate(near):
            others = sorted(i for i in idx if i != k)
            if not others:
                continue
            diff = samples[k] - samples[others]
            d2 = np.maximum(np.einsum("ij,ij->i", diff, diff), _WEISZFELD_EPS**2)
            # Gaussian falloff keeps the force continuous as samples cross the
            # radius boundary; a hard cutoff makes the relaxation oscillate.
            beta = np.exp(-4.0 * d2 / (h * h)) / d2
            new[k] += params.repulsion_weight * (beta[:, None] * diff).sum(axis=0) / beta.sum()
    return new


def l1_skeletonize(cloud: PointCloud, params: Optional[SkeletonizeParams] = None,
                   seed: int = 0) -> SkeletonGraph:
    """Contract a point cloud onto its curve skeleton and link samples into a graph.

    Deterministic given (cloud, params, seed). Non-convergence inside
    max_iters is not an error: the best iterate is returned and
    diagnostics["converged"] is False.
    """
    pts = cloud.points
    if params is None:
        params = SkeletonizeParams.for_cloud(pts)
    if len(pts) < params.num_seeds:
        raise TooFewPoints(f"cloud has {len(pts)} points, need at least {params.num_seeds}")

    rng = np.random.default_rng(seed)
    samples = pts[farthest_point_indices(pts, params.num_seeds, rng)].copy()
    cloud_tree = cKDTree(pts)

    converged = False
    iterations = 0
    max_disp = np.inf
    for iterations in range(1, params.max_iters + 1):
        moved = _contract_step(samples, cloud_tree, pts, params)
        max_disp = float(np.linalg.norm(moved - samples, axis=1).max())
        samples = moved
        if max_disp < params.convergence_tol:
            converged = True
            break

    # Near-coincident samples would create path segments too short to register
    # in cumulative arc length; merge them (first index wins).
    kept: List[int] = []
    for i in range(len(samples)):
        if not kept or (np.linalg.norm(samples[kept] - samples[i], axis=1)
                        > params.convergence_tol).all():
            kept.append(i)
    samples = samples[kept]

    pairs = cKDTree(samples).query_pairs(r=params.edge_radius)
    edges = {(min(i, j), max(i, j)) for i, j in pairs}
    graph = SkeletonGraph(samples, edges)
    if edges:
        # stragglers relative to the connected structure; with no edges at all
        # (e.g. a single contracted blob) the samples themselves are the result
        connected = sorted({v for e in graph.edges for v in e})
        graph = graph.subgraph(connected)
    graph.diagnostics.update(
        converged=converged, iterations=iterations, max_displacement=max_disp
    )
    if not converged:
        log.warning("l1_skeletonize stopped after %d iterations (max displacement %.3g)",
                    iterations, max_disp)
    return graph


def _leaf_branches(g: SkeletonGraph) -> List[Tuple[List[int], float]]:
    """Paths from each degree-1 vertex to the nearest degree>=3 vertex, with arc length.

    Bare paths (leaf to leaf with no junction in between) are not branches.
    """
    deg = g.degrees()
    adj: Dict[int, List[int]] = {i: [] for i in range(len(g))}
    for i, j in g.sorted_edges():
        adj[i].append(j)
        adj[j].append(i)
    branches = []
    for leaf in np.nonzero(deg == 1)[0]:
        path = [int(leaf)]
        length = 0.0
        prev = -1
        cur = int(leaf)
        while True:
            nxt = [v for v in adj[cur] if v != prev]
            if not nxt:
                path = None  # dead end without junction: bare path
                break
            prev, cur = cur, nxt[0]
            length += g.edge_length(path[-1], cur)
            path.append(cur)
            if deg[cur] >= 3:
                break
            if deg[cur] == 1:
                path = None  # reached another leaf: bare path
                break
        if path is not None:
            branches.append((path, length))
    return branches


def prune_short_branches(g: SkeletonGraph, min_len: float) -> SkeletonGraph:
    """Iteratively drop leaf branches shorter than min_len until a fixed point.

    A branch runs from a degree-1 vertex to the nearest degree>=3 vertex; the
    junction itself always survives. Bare path components are never pruned.
    """
    current = g
    while True:
        doomed: Set[int] = set()
        for path, length in _leaf_branches(current):
            if length < min_len:
                doomed.update(path[:-1])  # keep the junction
        if not doomed:
            return current
        keep = [v for v in range(len(current)) if v not in doomed]
        current = current.subgraph(keep)


def _largest_component(g: nx.Graph) -> Set[int]:
    comps = sorted(nx.connected_components(g), key=lambda c: (-len(c), min(c)))
    return comps[0]


def select_dendrite_path(g: SkeletonGraph) -> Skeleton:
    """Leaf-to-leaf path maximizing the count of interior vertices with degree > 2.

    Degrees are counted in the graph as given. Cycles are broken by removing
    the longest edge in each cycle (minimum spanning tree); ties go to the
    longer path, then to the smallest (start, end) leaf index pair. Works on
    the largest connected component if the graph is disconnected.
    """
    if not g.edges:
        raise NoLeaves("graph has no edges")
    nxg = g.to_networkx()
    nxg.remove_nodes_from([v for v in list(nxg) if nxg.degree(v) == 0])
    comp = _largest_component(nxg)
    if len(comp) < len(nxg):
        log.warning("select_dendrite_path: graph is disconnected, using the largest "
                    "component (%d of %d vertices)", len(comp), len(nxg))
    sub = nxg.subgraph(comp)
    deg = g.degrees()
    if not any(sub.degree(v) == 1 for v in sub):
        raise NoLeaves("component has no degree-1 vertex; prune or cut cycles first")

    tree = nx.minimum_spanning_tree(sub, weight="weight")
    leaves = sorted(v for v in tree if tree.degree(v) == 1)
    best = None
    for ai, a in enumerate(leaves):
        lengths, paths = nx.single_source_dijkstra(tree, a, weight="weight")
        for b in leaves[ai + 1:]:
            path = paths[b]
            score = sum(1 for v in path[1:-1] if deg[v] > 2)
            key = (score, lengths[b], -a, -b)
            if best is None or key > best[0]:
                best = (key, path)
    path = best[1]
    return compute_arc_length(g.vertices[path])


def cover_paths(g: SkeletonGraph, min_branch_len: float) -> List[Skeleton]:
    """Prune short branches, then cover every remaining edge with simple paths.

    Greedy: repeatedly extract the longest remaining leaf-to-leaf path and
    delete its edges. Components left without a leaf pair (cycles, lollipops)
    get their longest edge cut and emitted as a 2-vertex path, which restores
    leaves while keeping the exact-cover property.
    """
    pruned = prune_short_branches(g, min_branch_len)
    work = pruned.to_networkx()
    paths: List[List[int]] = []
    while work.number_of_edges() > 0:
        active = [v for v in work if work.degree(v) > 0]
        best = None
        for comp in nx.connected_components(work.subgraph(active)):
            leaves = sorted(v for v in comp if work.degree(v) == 1)
            for ai, a in enumerate(leaves):
                lengths, route = nx.single_source_dijkstra(work, a, weight="weight")
                for b in leaves[ai + 1:]:
                    key = (lengths[b], -a, -b)
                    if best is None or key > best[0]:
                        best = (key, route[b])
        if best is None:
            # Only cycle-bound components remain: cut their globally longest edge.
            u, v = max(
                work.edges,
                key=lambda e: (work.edges[e]["weight"], -min(e), -max(e)),
            )
            u, v = min(u, v), max(u, v)
            paths.append([u, v])
            work.remove_edge(u, v)
            continue
        path = best[1]
        paths.append(path)
        for u, v in zip(path[:-1], path[1:]):
            work.remove_edge(u, v)
    return [compute_arc_length(pruned.vertices[p]) for p in paths]

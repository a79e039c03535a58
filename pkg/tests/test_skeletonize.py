import itertools

import networkx as nx
import numpy as np
import pytest

from gencyl import (
    NoLeaves,
    PointCloud,
    SkeletonGraph,
    SkeletonizeParams,
    TooFewPoints,
    cover_paths,
    l1_skeletonize,
    prune_short_branches,
    select_dendrite_path,
)
from gencyl.skeletonize import farthest_point_indices, spanning_forest


def graph_from_positions(positions, edges):
    return SkeletonGraph(np.asarray(positions, dtype=float), set(edges))


def chain_positions(n, start=(0.0, 0.0, 0.0), step=(0.0, 0.0, 1.0)):
    start, step = np.asarray(start), np.asarray(step)
    return [tuple(start + i * step) for i in range(n)]


def weiszfeld_median(points, iters=500, tol=1e-12):
    """Independent geometric-median oracle (plain Weiszfeld on the full set)."""
    x = points.mean(axis=0)
    for _ in range(iters):
        d = np.linalg.norm(points - x, axis=1)
        keep = d > 1e-12
        if not keep.any():
            return x
        w = 1.0 / d[keep]
        nxt = (w[:, None] * points[keep]).sum(axis=0) / w.sum()
        if np.linalg.norm(nxt - x) < tol:
            return nxt
        x = nxt
    return x


def random_tree_graph(rng, n):
    """Uniform random labeled tree (Pruefer sequence) with random 3D positions."""
    if n == 2:
        edges = {(0, 1)}
    else:
        prufer = [int(rng.integers(0, n)) for _ in range(n - 2)]
        tree = nx.from_prufer_sequence(prufer)
        edges = {(min(u, v), max(u, v)) for u, v in tree.edges}
    positions = rng.normal(size=(n, 3))
    return graph_from_positions(positions, edges)


def random_graph(rng, n, extra_edges=2):
    g = random_tree_graph(rng, n)
    edges = set(g.edges)
    for _ in range(extra_edges):
        u, v = rng.integers(0, n, 2)
        if u != v:
            edges.add((min(int(u), int(v)), max(int(u), int(v))))
    return graph_from_positions(g.vertices, edges)


def brute_force_dendrite_path(g: SkeletonGraph):
    """Oracle: enumerate every leaf-to-leaf path of a tree, score by spec rules."""
    nxg = nx.Graph(sorted(g.edges))
    deg = g.degrees()
    leaves = sorted(v for v in nxg if nxg.degree(v) == 1)
    best_key, best_path = None, None
    for a, b in itertools.combinations(leaves, 2):
        path = nx.shortest_path(nxg, a, b)
        score = sum(1 for v in path[1:-1] if deg[v] > 2)
        length = sum(g.edge_length(u, v) for u, v in zip(path[:-1], path[1:]))
        key = (score, length, -a, -b)
        if best_key is None or key > best_key:
            best_key, best_path = key, path
    return best_path


class TestL1Skeletonize:
    def test_thin_cylinder_contracts_to_axis(self, rng):
        n = 1000
        z = rng.uniform(0, 10, n)
        th = rng.uniform(0, 2 * np.pi, n)
        pts = np.stack([0.1 * np.cos(th), 0.1 * np.sin(th), z], axis=1)
        graph = l1_skeletonize(PointCloud(pts), seed=1)
        assert len(graph) > 5
        axis_dist = np.linalg.norm(graph.vertices[:, :2], axis=1)
        assert axis_dist.max() < 0.15
        assert nx.number_connected_components(graph.to_networkx()) == 1

    def test_blob_matches_geometric_median(self, rng):
        n = 1000
        sigma = 0.5
        pts = rng.normal(scale=sigma, size=(n, 3)) + np.array([3.0, -1.0, 2.0])
        params = SkeletonizeParams(num_seeds=1, neighborhood_radius=10 * sigma,
                                   repulsion_weight=0.0)
        graph = l1_skeletonize(PointCloud(pts), params, seed=5)
        assert len(graph) == 1
        oracle = weiszfeld_median(pts)
        assert np.linalg.norm(graph.vertices[0] - oracle) < 3 * sigma / np.sqrt(n)

    def test_too_few_points(self, rng):
        pts = rng.normal(size=(10, 3))
        with pytest.raises(TooFewPoints):
            l1_skeletonize(PointCloud(pts), SkeletonizeParams(num_seeds=32,
                                                              neighborhood_radius=1.0))

    def test_deterministic(self, rng):
        pts = rng.normal(size=(400, 3))
        params = SkeletonizeParams(num_seeds=16, neighborhood_radius=1.0)
        a = l1_skeletonize(PointCloud(pts), params, seed=3)
        b = l1_skeletonize(PointCloud(pts), params, seed=3)
        assert np.array_equal(a.vertices, b.vertices)
        assert a.edges == b.edges

    def test_diagnostics_present(self, rng):
        pts = rng.normal(size=(200, 3))
        params = SkeletonizeParams(num_seeds=8, neighborhood_radius=1.0, max_iters=2)
        graph = l1_skeletonize(PointCloud(pts), params, seed=0)
        assert set(graph.diagnostics) >= {"converged", "iterations", "max_displacement"}

    def test_farthest_point_sampling_spreads(self, rng):
        pts = np.array([[0, 0, 0], [0, 0, 10], [0, 0, 5], [0, 0, 1]], dtype=float)
        idx = farthest_point_indices(pts, 3, np.random.default_rng(0))
        assert len(set(idx.tolist())) == 3


class TestPruneShortBranches:
    def y_graph(self, short_len=1.0):
        # junction at origin, two long arms of 10, one short arm
        pos = [(0, 0, 0)]
        edges = set()
        idx = 0
        for direction, length in (((1, 0, 0), 10), ((0, 1, 0), 10), ((0, 0, 1), short_len)):
            steps = max(1, int(length))
            prev = 0
            for i in range(1, steps + 1):
                pos.append(tuple(np.asarray(direction, float) * (length * i / steps)))
                idx += 1
                edges.add((min(prev, idx), max(prev, idx)))
                prev = idx
        return graph_from_positions(pos, edges)

    def test_removes_short_arm(self):
        g = self.y_graph(short_len=1.0)
        pruned = prune_short_branches(g, 2.0)
        deg = pruned.degrees()
        assert deg.max() == 2 and (deg == 1).sum() == 2  # a single path remains
        assert len(pruned) == len(g) - 1

    def test_bare_path_untouched(self):
        g = graph_from_positions(chain_positions(5), {(i, i + 1) for i in range(4)})
        pruned = prune_short_branches(g, 100.0)
        assert len(pruned) == 5 and len(pruned.edges) == 4

    def test_min_len_zero_is_noop(self):
        g = self.y_graph()
        pruned = prune_short_branches(g, 0.0)
        assert len(pruned) == len(g) and len(pruned.edges) == len(g.edges)

    def test_idempotent(self, rng):
        for _ in range(20):
            g = random_tree_graph(rng, int(rng.integers(4, 12)))
            once = prune_short_branches(g, 1.0)
            twice = prune_short_branches(once, 1.0)
            assert np.array_equal(once.vertices, twice.vertices)
            assert once.edges == twice.edges

    def test_no_short_branch_survives(self, rng):
        from gencyl.skeletonize import _leaf_branches

        for _ in range(20):
            g = random_graph(rng, int(rng.integers(4, 12)))
            pruned = prune_short_branches(g, 1.5)
            assert all(length >= 1.5 for _, length in _leaf_branches(pruned))


class TestSelectDendritePath:
    def test_caterpillar_spine(self, rng):
        # spine of 10 vertices; 6 interior ones carry pendant leaves
        pos = chain_positions(10, step=(1.0, 0, 0))
        edges = {(i, i + 1) for i in range(9)}
        idx = 10
        for spine_v in (2, 3, 4, 5, 6, 7):
            pos.append((float(spine_v), 1.0, 0.0))
            edges.add((spine_v, idx))
            idx += 1
        g = graph_from_positions(pos, edges)
        path = select_dendrite_path(g)
        assert len(path) == 10
        assert np.allclose(path.vertices[:, 1], 0.0)

    def test_bare_path_selected_whole(self):
        g = graph_from_positions(chain_positions(5), {(i, i + 1) for i in range(4)})
        path = select_dendrite_path(g)
        assert len(path) == 5

    def test_star_tie_breaks_smallest_pair(self):
        pos = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
        g = graph_from_positions(pos, {(0, 1), (0, 2), (0, 3)})
        path = select_dendrite_path(g)
        # all arm pairs tie on score and length; (1, 2) is the smallest pair
        assert np.array_equal(path.vertices, np.asarray(pos, float)[[1, 0, 2]])

    def test_pure_cycle_raises(self):
        pos = [(np.cos(a), np.sin(a), 0.0) for a in np.linspace(0, 2 * np.pi, 6)[:-1]]
        edges = {(i, (i + 1) % 5) for i in range(5)}
        with pytest.raises(NoLeaves):
            select_dendrite_path(graph_from_positions(pos, edges))

    def test_matches_brute_force_on_random_trees(self, rng):
        for _ in range(50):
            g = random_tree_graph(rng, int(rng.integers(2, 13)))
            expected = brute_force_dendrite_path(g)
            got = select_dendrite_path(g)
            assert np.array_equal(got.vertices, g.vertices[expected])


class TestCoverPaths:
    def test_path_graph_single_path(self):
        g = graph_from_positions(chain_positions(5), {(i, i + 1) for i in range(4)})
        paths = cover_paths(g, 0.0)
        assert len(paths) == 1 and len(paths[0]) == 5

    def test_y_graph_two_paths(self):
        pos = [(0, 0, 0), (-3, 0, 0), (3, 0, 0), (0, 2, 0)]
        g = graph_from_positions(pos, {(0, 1), (0, 2), (0, 3)})
        paths = cover_paths(g, 0.0)
        assert len(paths) == 2
        assert paths[0].total_length == pytest.approx(6.0)  # longest arm pair first
        assert paths[1].total_length == pytest.approx(2.0)

    def test_empty_graph(self):
        g = graph_from_positions(np.empty((0, 3)), set())
        assert cover_paths(g, 0.0) == []

    def _edge_multiset(self, g, paths):
        pos_to_idx = {tuple(v): i for i, v in enumerate(g.vertices)}
        covered = []
        for path in paths:
            idx = [pos_to_idx[tuple(v)] for v in path.vertices]
            for u, v in zip(idx[:-1], idx[1:]):
                covered.append((min(u, v), max(u, v)))
        return covered

    def test_exact_cover_on_random_graphs(self, rng):
        for _ in range(50):
            g = random_graph(rng, int(rng.integers(3, 12)), extra_edges=int(rng.integers(0, 4)))
            paths = cover_paths(g, 0.0)
            covered = self._edge_multiset(g, paths)
            assert len(covered) == len(set(covered)), "an edge was covered twice"
            assert set(covered) == g.edges

    def test_paths_are_simple(self, rng):
        for _ in range(20):
            g = random_graph(rng, 10, extra_edges=3)
            for path in cover_paths(g, 0.0):
                keys = [tuple(v) for v in path.vertices]
                assert len(keys) == len(set(keys))


class TestSpanningForest:
    def test_cuts_longest_edge_of_cycle(self):
        pos = [(0, 0, 0), (1, 0, 0), (1, 2, 0)]
        g = graph_from_positions(pos, {(0, 1), (1, 2), (0, 2)})
        forest = spanning_forest(g)
        # the 0-2 edge (length sqrt(5)) is the longest in the triangle
        assert forest.edges == {(0, 1), (1, 2)}

    def test_noop_on_tree(self, rng):
        g = random_tree_graph(rng, 8)
        assert spanning_forest(g).edges == g.edges


class TestSkeletonGraphType:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            graph_from_positions([(0, 0, 0), (1, 1, 1)], {(0, 0)})

    def test_rejects_bad_index(self):
        with pytest.raises(ValueError):
            graph_from_positions([(0, 0, 0), (1, 1, 1)], {(0, 5)})

    def test_normalizes_edge_order(self):
        g = graph_from_positions([(0, 0, 0), (1, 1, 1)], {(1, 0)})
        assert g.edges == {(0, 1)}

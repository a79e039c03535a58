"""Fragmenting along the skeleton, fixed-size batching, and majority voting.

Fragments are arc-length windows over the transformed cloud; batches pad the
last deficient chunk up to the exact batch size by reusing points from the
same fragment. Votes accumulate per point across all batches (duplicates and
overlapping windows vote multiple times) and resolve by majority with the
smallest label winning ties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import (
    BadWindow,
    EmptyFragment,
    MissingVotes,
    OutOfGrid,
    UncoveredPoint,
)
from .geometry import CylindricalCloud, PointCloud, Skeleton
from .io import VolumeGrid

_TILE_EPS = 1e-9


@dataclass
class Fragment:
    """Points of one arc-length window; indices refer to the parent cloud."""

    point_indices: np.ndarray
    skeleton_range: Tuple[int, int]
    window: Tuple[float, float]

    def __post_init__(self):
        self.point_indices = np.asarray(self.point_indices, dtype=np.int64)
        lo, hi = self.window
        if not lo < hi:
            raise BadWindow(f"window ({lo}, {hi}) is empty")

    def __len__(self) -> int:
        return len(self.point_indices)


@dataclass
class Batch:
    """Exactly batch_size parent-cloud indices; duplicates mark ceiled-up points."""

    point_indices: np.ndarray
    source_fragment: int = 0

    def __post_init__(self):
        self.point_indices = np.asarray(self.point_indices, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.point_indices)


class LabelVote:
    """Accumulated per-point multisets of predicted labels."""

    def __init__(self, n_points: int):
        if n_points < 0:
            raise ValueError("n_points must be non-negative")
        self.n_points = n_points
        self._points: List[np.ndarray] = []
        self._labels: List[np.ndarray] = []

    def add(self, point_indices, labels):
        pts = np.asarray(point_indices, dtype=np.int64)
        lab = np.asarray(labels, dtype=np.int64)
        if pts.shape != lab.shape:
            raise ValueError("point indices and labels must align")
        if pts.size and (pts.min() < 0 or pts.max() >= self.n_points):
            raise ValueError("point index outside the cloud")
        self._points.append(pts)
        self._labels.append(lab)

    def counts(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Unique (point, label) pairs and their vote counts."""
        if not self._points:
            return (np.empty(0, np.int64),) * 3
        pts = np.concatenate(self._points)
        lab = np.concatenate(self._labels)
        pairs, n = np.unique(np.stack([pts, lab], axis=1), axis=0, return_counts=True)
        return pairs[:, 0], pairs[:, 1], n

    def coverage(self) -> np.ndarray:
        covered = np.zeros(self.n_points, dtype=bool)
        for pts in self._points:
            covered[pts] = True
        return covered


def _majority_by_group(groups: np.ndarray, labels: np.ndarray, counts: np.ndarray
                       ) -> Tuple[np.ndarray, np.ndarray]:
    """Winning label per group: highest count, then smallest label. Inputs are
    unique (group, label) pairs sorted by (group, label) as np.unique yields them."""
    order = np.lexsort((labels, -counts, groups))
    g, lab = groups[order], labels[order]
    first = np.ones(len(g), dtype=bool)
    first[1:] = g[1:] != g[:-1]
    return g[first], lab[first]


def majority_vote(votes: LabelVote) -> np.ndarray:
    """Per-point winning labels; raises MissingVotes if any point has none."""
    covered = votes.coverage()
    if not covered.all():
        raise MissingVotes(f"point {int(np.nonzero(~covered)[0][0])} has no votes")
    pts, lab, n = votes.counts()
    winners_pt, winners_lab = _majority_by_group(pts, lab, n)
    out = np.empty(votes.n_points, dtype=np.int64)
    out[winners_pt] = winners_lab
    return out


def fragment_cloud(ccloud: CylindricalCloud, skeleton: Skeleton, window_len: float,
                   overlap_frac: float) -> List[Fragment]:
    """Tile [0, total_arc_length] with overlapping closed windows and bin points by g.

    Window k spans [k*stride, k*stride + window_len] with
    stride = window_len * (1 - overlap_frac); every point lands in each
    window containing its g, hence in at least one fragment.
    """
    if window_len <= 0:
        raise BadWindow("window_len must be positive")
    if not 0.0 <= overlap_frac < 1.0:
        raise ValueError("overlap_frac must be in [0, 1)")
    total = skeleton.total_length
    stride = window_len * (1.0 - overlap_frac)
    if window_len >= total:
        nwin = 1
    else:
        nwin = int(math.ceil((total - window_len) / stride - _TILE_EPS)) + 1
    g = ccloud.g
    cum = skeleton.cum_arc
    fragments = []
    for k in range(nwin):
        lo = k * stride
        hi = lo + window_len
        inside = np.nonzero((g >= lo) & (g <= hi))[0]
        start = int(np.searchsorted(cum, lo, side="left"))
        end = int(np.searchsorted(cum, hi, side="right")) - 1
        fragments.append(Fragment(inside, (start, end), (lo, hi)))
    return fragments


def make_batches(fragment: Fragment, batch_size: int, seed: int,
                 fragment_index: int = 0) -> List[Batch]:
    """Split a fragment into ceil(n / batch_size) batches of exactly batch_size points.

    The final deficient batch is ceiled up by sampling from the fragment's
    other points without replacement until they run out, then with
    replacement (from its own points if there are no others). Deterministic
    given seed.
    """
    if batch_size <= 0:
        raise ValueError("batch_size must be positive")
    indices = fragment.point_indices
    n = len(indices)
    if n == 0:
        raise EmptyFragment("cannot batch an empty fragment")
    rng = np.random.default_rng(seed)
    batches = []
    for b in range(math.ceil(n / batch_size)):
        chunk = indices[b * batch_size:(b + 1) * batch_size]
        if len(chunk) < batch_size:
            deficit = batch_size - len(chunk)
            pool = indices[: b * batch_size]
            if len(pool) == 0:
                pool = chunk
            take = rng.permutation(len(pool))[:deficit]
            extra = pool[take]
            if deficit > len(pool):
                extra = np.concatenate(
                    [extra, pool[rng.integers(0, len(pool), deficit - len(pool))]]
                )
            chunk = np.concatenate([chunk, extra])
        batches.append(Batch(chunk, fragment_index))
    return batches


def assemble_prediction(n_points: int, batches: Sequence[Batch],
                        batch_labels: Sequence[np.ndarray]) -> np.ndarray:
    """Accumulate per-batch labels into votes and resolve every cloud point.

    Points duplicated across batches (window overlap or ceil-up) get multiple
    votes; the result is invariant to batch ordering. Raises UncoveredPoint
    if some cloud point appears in no batch.
    """
    if len(batches) != len(batch_labels):
        raise ValueError("one label sequence per batch required")
    votes = LabelVote(n_points)
    for batch, labels in zip(batches, batch_labels):
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != batch.point_indices.shape:
            raise ValueError("labels must align with the batch's point indices")
        votes.add(batch.point_indices, labels)
    covered = votes.coverage()
    if not covered.all():
        raise UncoveredPoint(f"point {int(np.nonzero(~covered)[0][0])} appears in no batch")
    return majority_vote(votes)


def remap_to_volume(cloud: PointCloud, labels, grid: VolumeGrid) -> VolumeGrid:
    """Scatter per-point labels into a volume by voxel majority vote.

    Each point votes in the voxel containing it; ties go to the smallest
    label and untouched voxels stay background 0.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (len(cloud),):
        raise ValueError("labels length must match cloud length")
    data = np.zeros(grid.shape, dtype=np.int64)
    if len(cloud) == 0:
        return VolumeGrid(grid.shape, grid.voxel_size, grid.origin.copy(), data)
    rel = (cloud.points - grid.origin) / np.asarray(grid.voxel_size)
    idx = np.floor(rel).astype(np.int64)
    shape = np.asarray(grid.shape)
    bad = np.nonzero((idx < 0).any(axis=1) | (idx >= shape).any(axis=1))[0]
    if bad.size:
        raise OutOfGrid(f"point {int(bad[0])} falls outside the grid")
    flat = (idx[:, 0] * grid.shape[1] + idx[:, 1]) * grid.shape[2] + idx[:, 2]
    pairs, n = np.unique(np.stack([flat, labels], axis=1), axis=0, return_counts=True)
    vox, winners = _majority_by_group(pairs[:, 0], pairs[:, 1], n)
    data.reshape(-1)[vox] = winners
    return VolumeGrid(grid.shape, grid.voxel_size, grid.origin.copy(), data)

"""
Spatial Queries

Exact range queries, k-nearest-neighbor search and fixed-radius neighbor
lists over a dynamic octree. Distances are compared in squared form and
cutoffs are inclusive; every result is ordered by (distance, id).
"""

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Tuple

import numpy as np

from src.core.error_handler import InputError
from src.core.validation_utils import as_point, as_point_array, require_non_negative, require_positive
from .dynamic_octree import NO_CHILD, Octree
from .geometry import box_box_sq_dist, box_point_sq_dist

logger = logging.getLogger(__name__)

Hit = Tuple[int, float]


@dataclass
class TraversalStats:
    """Work counters of one neighbor-list build"""
    node_pairs_visited: int = 0
    node_pairs_pruned: int = 0
    interactions: int = 0


@dataclass
class NeighborList:
    """
    Symmetric, self-free neighbor lists within an inclusive cutoff.

    `lists[i]` and `distances[i]` are aligned and sorted by (distance, id).
    """
    cutoff: float
    lists: Dict[int, List[int]]
    distances: Dict[int, List[float]]
    stats: TraversalStats = field(default_factory=TraversalStats)

    @classmethod
    def from_raw(cls, cutoff: float, raw: Dict[int, List[Tuple[float, int]]],
                 stats: TraversalStats = None) -> "NeighborList":
        """Build from per-id lists of (squared distance, neighbor id)."""
        lists = {}
        distances = {}
        for point_id, entries in raw.items():
            entries.sort()
            lists[point_id] = [j for _, j in entries]
            distances[point_id] = [math.sqrt(sq) for sq, _ in entries]
        return cls(cutoff=cutoff, lists=lists, distances=distances, stats=stats or TraversalStats())

    def neighbors(self, point_id: int) -> List[int]:
        return self.lists[point_id]

    def degree(self, point_id: int) -> int:
        return len(self.lists[point_id])

    def pairs(self) -> Iterator[Tuple[int, int, float]]:
        """Each unordered pair once, as (i, j, distance) with i < j."""
        for i in sorted(self.lists):
            for j, dist in zip(self.lists[i], self.distances[i]):
                if i < j:
                    yield i, j, dist

    def pair_count(self) -> int:
        return sum(len(v) for v in self.lists.values()) // 2

    def mean_degree(self) -> float:
        if not self.lists:
            return 0.0
        return sum(len(v) for v in self.lists.values()) / len(self.lists)

    def to_rows(self) -> Iterator[Tuple[int, int, float]]:
        """(id, neighbor_id, distance) rows in id order, each list in its stored order."""
        for i in sorted(self.lists):
            for j, dist in zip(self.lists[i], self.distances[i]):
                yield i, j, dist


def range_query(tree: Octree, center, radius: float) -> List[Hit]:
    """
    All points within `radius` of `center` (inclusive), sorted by (distance, id).

    Raises:
        InputError: negative radius or non-finite center
    """
    c = as_point(center, "center")
    require_non_negative(radius, "radius")
    rr = radius * radius
    cx, cy, cz = c

    found: List[Tuple[float, int]] = []
    stack = [tree.root]
    while stack:
        node = tree.node(stack.pop())
        if box_point_sq_dist(node.lo, node.hi, c) > rr:
            continue
        if node.children is None:
            for point_id, p in node.points.items():
                dx = p[0] - cx
                dy = p[1] - cy
                dz = p[2] - cz
                sq = dx * dx + dy * dy + dz * dz
                if sq <= rr:
                    found.append((sq, point_id))
        else:
            stack.extend(h for h in node.children if h != NO_CHILD)

    found.sort()
    return [(point_id, math.sqrt(sq)) for sq, point_id in found]


def k_nearest(tree: Octree, query, k: int) -> List[Hit]:
    """
    The k points minimizing (distance, id); fewer when the tree holds fewer.

    Best-first traversal ordered by box min-distance. A node is skipped only
    when its min-distance is strictly greater than the current k-th distance,
    so equal-distance points with smaller ids are never lost.
    """
    q = as_point(query, "query")
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise InputError("k must be a positive integer", field_name='k', field_value=k)
    if len(tree) == 0:
        return []
    qx, qy, qz = q

    # max-heap of the best k as (-sq, -id)
    best: List[Tuple[float, int]] = []
    frontier = [(0.0, tree.root)]
    while frontier:
        mind, h = heapq.heappop(frontier)
        if len(best) == k and mind > -best[0][0]:
            break
        node = tree.node(h)
        if node.children is None:
            for point_id, p in node.points.items():
                dx = p[0] - qx
                dy = p[1] - qy
                dz = p[2] - qz
                sq = dx * dx + dy * dy + dz * dz
                if len(best) < k:
                    heapq.heappush(best, (-sq, -point_id))
                else:
                    worst_sq, worst_id = -best[0][0], -best[0][1]
                    if sq < worst_sq or (sq == worst_sq and point_id < worst_id):
                        heapq.heapreplace(best, (-sq, -point_id))
        else:
            for child in node.children:
                if child == NO_CHILD:
                    continue
                c = tree.node(child)
                heapq.heappush(frontier, (box_point_sq_dist(c.lo, c.hi, q), child))

    ordered = sorted((-neg_sq, -neg_id) for neg_sq, neg_id in best)
    return [(point_id, math.sqrt(sq)) for sq, point_id in ordered]


def build_neighbor_lists(tree: Octree, d: float) -> NeighborList:
    """
    Neighbor lists for every live point at inclusive cutoff d.

    Dual-tree traversal over node pairs; a pair is pruned when the minimum
    distance between the two boxes exceeds d, and leaf pairs are tested
    point by point.

    Raises:
        InputError: d is not positive
    """
    require_positive(d, "d")
    dd = d * d
    stats = TraversalStats()
    raw: Dict[int, List[Tuple[float, int]]] = {point_id: [] for point_id in tree.ids()}

    stack = [(tree.root, tree.root)]
    while stack:
        ha, hb = stack.pop()
        a = tree.node(ha)
        stats.node_pairs_visited += 1

        if ha == hb:
            if a.children is None:
                _leaf_self_pairs(a.points, dd, raw, stats)
            else:
                kids = [h for h in a.children if h != NO_CHILD]
                for i, ci in enumerate(kids):
                    for cj in kids[i:]:
                        stack.append((ci, cj))
            continue

        b = tree.node(hb)
        if box_box_sq_dist(a.lo, a.hi, b.lo, b.hi) > dd:
            stats.node_pairs_pruned += 1
            continue

        a_leaf = a.children is None
        b_leaf = b.children is None
        if a_leaf and b_leaf:
            _leaf_cross_pairs(a.points, b.points, dd, raw, stats)
        elif a_leaf:
            stack.extend((ha, c) for c in b.children if c != NO_CHILD)
        elif b_leaf:
            stack.extend((c, hb) for c in a.children if c != NO_CHILD)
        else:
            for ca in a.children:
                if ca == NO_CHILD:
                    continue
                stack.extend((ca, cb) for cb in b.children if cb != NO_CHILD)

    result = NeighborList.from_raw(d, raw, stats)
    logger.debug(f"Neighbor lists at d={d}: {result.pair_count()} pairs, "
                 f"{stats.interactions} interactions, {stats.node_pairs_pruned} pruned node pairs")
    return result


def _leaf_self_pairs(points: Dict[int, Tuple[float, float, float]], dd: float,
                     raw: Dict[int, List[Tuple[float, int]]], stats: TraversalStats) -> None:
    items = list(points.items())
    n = len(items)
    for i in range(n):
        id_i, p = items[i]
        px, py, pz = p
        for j in range(i + 1, n):
            id_j, q = items[j]
            dx = px - q[0]
            dy = py - q[1]
            dz = pz - q[2]
            sq = dx * dx + dy * dy + dz * dz
            if sq <= dd:
                raw[id_i].append((sq, id_j))
                raw[id_j].append((sq, id_i))
    stats.interactions += n * (n - 1) // 2


def _leaf_cross_pairs(points_a: Dict[int, Tuple[float, float, float]],
                      points_b: Dict[int, Tuple[float, float, float]], dd: float,
                      raw: Dict[int, List[Tuple[float, int]]], stats: TraversalStats) -> None:
    items_b = list(points_b.items())
    for id_i, p in points_a.items():
        px, py, pz = p
        for id_j, q in items_b:
            dx = px - q[0]
            dy = py - q[1]
            dz = pz - q[2]
            sq = dx * dx + dy * dy + dz * dz
            if sq <= dd:
                raw[id_i].append((sq, id_j))
                raw[id_j].append((sq, id_i))
    stats.interactions += len(points_a) * len(items_b)


def cutoff_for_mean_degree(points, target: float, seed: int = 0, sample_size: int = 1000) -> float:
    """
    Cutoff d at which the mean neighbor count is approximately `target`.

    Mean degree is estimated from a seeded sample of query points against
    the full cloud, then d is found by bisection.
    """
    pts = as_point_array(points)
    require_positive(target, "target")
    n = len(pts)
    if n < 2:
        raise InputError("at least two points are needed to choose a cutoff", field_name='points',
                         field_value=n)
    rng = np.random.default_rng(seed)
    sample = pts[rng.choice(n, size=min(n, sample_size), replace=False)]

    # distances from each sampled point to its nearest `keep` neighbors (self included at 0)
    keep = min(n, int(math.ceil(target * 4)) + 1)
    nearest = np.empty((len(sample), keep))
    for row, p in enumerate(sample):
        diff = pts - p
        sq = diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1] + diff[:, 2] * diff[:, 2]
        nearest[row] = np.sqrt(np.partition(sq, keep - 1)[:keep])

    def mean_degree(d: float) -> float:
        return float(np.mean(np.sum(nearest <= d, axis=1) - 1))

    lo, hi = 0.0, float(nearest.max())
    if mean_degree(hi) < target:
        return hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mean_degree(mid) < target:
            lo = mid
        else:
            hi = mid
    return hi

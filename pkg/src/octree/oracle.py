"""
Brute-force reference queries.

Linear scans over a flat point set with the same inclusive cutoffs,
squared-distance arithmetic and (distance, id) ordering as the octree
queries, so results can be compared for exact equality.
"""

import math
from typing import Iterable, List, Tuple, Any

import numpy as np

from src.core.error_handler import InputError
from src.core.validation_utils import as_point, as_point_array, require_non_negative, require_positive
from .spatial_queries import Hit, NeighborList, TraversalStats


class FlatPointSet:
    """Ids and coordinates held as parallel numpy arrays"""

    def __init__(self, entries: Iterable[Tuple[int, Any]] = ()):
        entries = list(entries)
        ids = [int(point_id) for point_id, _ in entries]
        if len(set(ids)) != len(ids):
            raise InputError("FlatPointSet ids must be unique", field_name='ids')
        self.ids = np.asarray(ids, dtype=np.int64)
        if entries:
            self.coords = as_point_array([pos for _, pos in entries])
        else:
            self.coords = np.empty((0, 3), dtype=np.float64)

    @classmethod
    def from_arrays(cls, ids, coords) -> "FlatPointSet":
        return cls(zip(np.asarray(ids).tolist(), np.asarray(coords, dtype=np.float64).tolist()))

    @classmethod
    def from_tree(cls, tree) -> "FlatPointSet":
        return cls(tree.items())

    def __len__(self) -> int:
        return len(self.ids)

    def _sq_dist_to(self, p) -> np.ndarray:
        diff = self.coords - np.asarray(p, dtype=np.float64)
        return diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1] + diff[:, 2] * diff[:, 2]


def _ordered_hits(ids: np.ndarray, sq: np.ndarray) -> List[Hit]:
    order = np.lexsort((ids, sq))
    return [(int(ids[i]), math.sqrt(float(sq[i]))) for i in order]


def brute_range(points: FlatPointSet, center, radius: float) -> List[Hit]:
    c = as_point(center, "center")
    require_non_negative(radius, "radius")
    if len(points) == 0:
        return []
    sq = points._sq_dist_to(c)
    mask = sq <= radius * radius
    return _ordered_hits(points.ids[mask], sq[mask])


def brute_knn(points: FlatPointSet, query, k: int) -> List[Hit]:
    q = as_point(query, "query")
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise InputError("k must be a positive integer", field_name='k', field_value=k)
    if len(points) == 0:
        return []
    return _ordered_hits(points.ids, points._sq_dist_to(q))[:k]


def brute_pairs(points: FlatPointSet, d: float, chunk: int = 256) -> NeighborList:
    """Full O(n^2) pair scan at inclusive cutoff d, processed in row blocks."""
    require_positive(d, "d")
    dd = d * d
    coords = points.coords
    ids = points.ids.tolist()
    raw = {point_id: [] for point_id in ids}
    n = len(ids)
    stats = TraversalStats(interactions=n * (n - 1) // 2)

    for start in range(0, n, chunk):
        block = coords[start:start + chunk]
        # columns from `start` onward; strict upper triangle handled by the mask
        rest = coords[start:]
        dx = block[:, None, 0] - rest[None, :, 0]
        dy = block[:, None, 1] - rest[None, :, 1]
        dz = block[:, None, 2] - rest[None, :, 2]
        sq = dx * dx + dy * dy + dz * dz
        rows, cols = np.nonzero(sq <= dd)
        for r, c in zip(rows.tolist(), cols.tolist()):
            i = start + r
            j = start + c
            if j <= i:
                continue
            s = float(sq[r, c])
            raw[ids[i]].append((s, ids[j]))
            raw[ids[j]].append((s, ids[i]))

    return NeighborList.from_raw(d, raw, stats)

"""
Property checks for a live octree: seeded mixed workloads, admissibility
and exact agreement with the brute-force oracle.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.core.validation_utils import Point3
from .dynamic_octree import AdmissibilityReport, Octree, OctreeConfig, create
from .geometry import Aabb
from .oracle import FlatPointSet, brute_knn, brute_pairs, brute_range
from .spatial_queries import build_neighbor_lists, k_nearest, range_query

logger = logging.getLogger(__name__)

INSERT_SHARE = 0.45
MOVE_SHARE = 0.35
MOVE_SIGMA = 0.05


class MixedWorkload:
    """
    45% insert / 35% move / 20% remove over a slowly drifting unit box.

    `positions` mirrors the tree's contents after every operation.
    """

    def __init__(self, tree: Octree, seed: int = 0):
        self.tree = tree
        self.rng = np.random.default_rng(seed)
        self.positions: Dict[int, Point3] = dict(tree.items())
        self._live: List[int] = list(self.positions)
        self.next_id = max(self.positions, default=-1) + 1
        self.counts = {'insert': 0, 'move': 0, 'remove': 0}

    def run(self, ops: int) -> None:
        rng = self.rng
        for step in range(ops):
            drift = np.array([step, -0.5 * step, 0.25 * step]) / ops
            roll = rng.random()
            if roll < INSERT_SHARE or not self._live:
                p = tuple((rng.random(3) + drift).tolist())
                self.tree.insert(self.next_id, p)
                self.positions[self.next_id] = p
                self._live.append(self.next_id)
                self.next_id += 1
                self.counts['insert'] += 1
            elif roll < INSERT_SHARE + MOVE_SHARE:
                point_id = self._live[int(rng.integers(len(self._live)))]
                p = tuple((np.asarray(self.positions[point_id]) + rng.normal(scale=MOVE_SIGMA, size=3)).tolist())
                self.tree.update_position(point_id, p)
                self.positions[point_id] = p
                self.counts['move'] += 1
            else:
                idx = int(rng.integers(len(self._live)))
                point_id = self._live[idx]
                self._live[idx] = self._live[-1]
                self._live.pop()
                self.tree.remove(point_id)
                del self.positions[point_id]
                self.counts['remove'] += 1


def oracle_mismatches(tree: Octree, queries: int = 50, seed: int = 0,
                      radii: Sequence[float] = (0.05, 0.1, 0.2),
                      ks: Sequence[int] = (1, 10),
                      cutoffs: Sequence[float] = (0.02, 0.05)) -> int:
    """Number of range, k-nearest and neighbor-list results that differ from the oracle"""
    flat = FlatPointSet.from_tree(tree)
    rng = np.random.default_rng(seed)
    lo = np.asarray(tree.bounds.min)
    hi = np.asarray(tree.bounds.max)
    mismatches = 0
    for q in (lo + rng.random((queries, 3)) * (hi - lo)).tolist():
        for radius in radii:
            mismatches += range_query(tree, q, radius) != brute_range(flat, q, radius)
        for k in ks:
            mismatches += k_nearest(tree, q, k) != brute_knn(flat, q, k)
    for d in cutoffs:
        ours = build_neighbor_lists(tree, d)
        expected = brute_pairs(flat, d)
        mismatches += ours.lists != expected.lists or ours.distances != expected.distances
    return int(mismatches)


@dataclass
class PropertyCheckResult:
    """Outcome of one (K, alpha) setting"""
    K: int
    alpha: float
    ops: int
    size: int
    report: AdmissibilityReport
    oracle_mismatches: int
    elapsed_s: float
    counts: Dict[str, int] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.report.ok and self.oracle_mismatches == 0

    def to_row(self) -> dict:
        return {
            'K': self.K,
            'alpha': self.alpha,
            'ops': self.ops,
            'size': self.size,
            'violations': len(self.report.violations),
            'depth_capped': self.report.depth_capped,
            'oracle_mismatches': self.oracle_mismatches,
            'status': 'pass' if self.passed else 'fail',
        }


def check_setting(config: OctreeConfig, ops: int, seed: int = 0, queries: int = 50,
                  bounds: Optional[Aabb] = None) -> PropertyCheckResult:
    """Run a mixed workload under `config`, then audit admissibility and oracle agreement"""
    start = time.perf_counter()
    tree = create(config, bounds or Aabb.cube(0.0, 1.0))
    workload = MixedWorkload(tree, seed)
    workload.run(ops)
    report = tree.validate_admissibility()
    mismatches = oracle_mismatches(tree, queries, seed) if len(tree) else 0
    elapsed = time.perf_counter() - start
    for violation in report.violations:
        logger.error(f"K={config.K} alpha={config.alpha}: {violation}")
    logger.info(f"Property check K={config.K} alpha={config.alpha}: {len(report.violations)} violations, "
                f"{mismatches} oracle mismatches ({elapsed:.2f}s)")
    return PropertyCheckResult(config.K, config.alpha, ops, len(tree), report, mismatches, elapsed,
                               dict(workload.counts))

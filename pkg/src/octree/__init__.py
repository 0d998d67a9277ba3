"""
Octree Module

Dynamic (K, alpha)-admissible octree and the queries built on it.

Components:
- Octree: mutable point index with localized insert/remove/move
- spatial_queries: range, k-nearest and fixed-radius neighbor lists
- oracle: brute-force reference implementations of the same queries
- property_suite: seeded mixed workloads audited against the oracle
"""

from .geometry import Aabb, sq_dist, distance, box_point_sq_dist, box_box_sq_dist
from .dynamic_octree import (
    OctreeConfig,
    Octree,
    Node,
    AdmissibilityReport,
    OctreeStats,
    create,
    load_octree_config
)
from .spatial_queries import (
    NeighborList,
    TraversalStats,
    range_query,
    k_nearest,
    build_neighbor_lists,
    cutoff_for_mean_degree
)
from .oracle import FlatPointSet, brute_range, brute_knn, brute_pairs
from .property_suite import MixedWorkload, PropertyCheckResult, check_setting, oracle_mismatches

__all__ = [
    'Aabb',
    'sq_dist',
    'distance',
    'box_point_sq_dist',
    'box_box_sq_dist',
    'OctreeConfig',
    'Octree',
    'Node',
    'AdmissibilityReport',
    'OctreeStats',
    'create',
    'load_octree_config',
    'NeighborList',
    'TraversalStats',
    'range_query',
    'k_nearest',
    'build_neighbor_lists',
    'cutoff_for_mean_degree',
    'FlatPointSet',
    'brute_range',
    'brute_knn',
    'brute_pairs',
    'MixedWorkload',
    'PropertyCheckResult',
    'check_setting',
    'oracle_mismatches'
]

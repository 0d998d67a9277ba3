"""
Test Configuration and Utilities

Common fixtures for the dynamic octree test suite: seeded point clouds and
small helpers for building trees from arrays.
"""

import pytest
import numpy as np

from src.octree import Aabb, Octree, OctreeConfig, create


def build_tree(points, K: int = 10, alpha: float = 2.0, max_depth: int = 32,
               bounds: Aabb = None) -> Octree:
    """Insert rows of `points` one by one with ids 0..n-1"""
    tree = create(OctreeConfig(K=K, alpha=alpha, max_depth=max_depth),
                  bounds or Aabb.cube(0.0, 1.0))
    for i, p in enumerate(np.asarray(points, dtype=np.float64).tolist()):
        tree.insert(i, p)
    return tree


@pytest.fixture
def rng():
    """Seeded generator shared by tests that need random data"""
    return np.random.default_rng(12345)


@pytest.fixture
def uniform_cloud(rng):
    """1,000 uniform points in the unit cube"""
    return rng.random((1000, 3))


@pytest.fixture
def clustered_cloud(rng):
    """1,000 points in four tight Gaussian clusters"""
    centers = np.array([[0.2, 0.2, 0.2], [0.8, 0.2, 0.7], [0.5, 0.8, 0.4], [0.3, 0.6, 0.9]])
    labels = rng.integers(0, len(centers), size=1000)
    return np.clip(centers[labels] + rng.normal(scale=0.03, size=(1000, 3)), 0.0, 1.0)


@pytest.fixture
def boundary_cloud(rng):
    """
    Points snapped onto the first three levels of octant split planes so
    that many lie exactly on node faces.
    """
    grid = np.array([0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0])
    snapped = grid[rng.integers(0, len(grid), size=(600, 3))]
    loose = rng.random((400, 3))
    # nudge a subset just off the planes
    loose[:200] = snapped[:200] + rng.choice([-1e-12, 1e-12], size=(200, 3))
    return np.clip(np.vstack([snapped, loose]), 0.0, 1.0)


@pytest.fixture
def sample_config():
    """Application configuration mapping used by config tests"""
    return {
        'environment': 'test',
        'seed': 7,
        'octree': {'K': 4, 'alpha': 2.0, 'max_depth': 16, 'expansion_factor': 2.0},
        'svgd': {'n': 50, 'iterations': 5},
        'logging': {'level': 'DEBUG', 'file_enabled': False}
    }


@pytest.fixture
def tree_factory():
    """Factory building an octree from an (n, 3) array with ids 0..n-1"""
    return build_tree

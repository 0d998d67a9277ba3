"""
Tests for the dynamic octree

Covers configuration, insertion with splitting, removal with collapsing,
localized moves, bounds expansion and admissibility validation.
"""

import json

import pytest

from src.core import ConfigurationError, DuplicateIdError, InputError, NotFoundError
from src.octree import (
    Aabb, Octree, OctreeConfig, create, load_octree_config, range_query, k_nearest,
    build_neighbor_lists
)
from src.octree.dynamic_octree import NO_CHILD
from src.octree.property_suite import MixedWorkload, check_setting, oracle_mismatches

SPREAD = [
    (0.1, 0.1, 0.1),
    (0.9, 0.1, 0.1),
    (0.1, 0.9, 0.1),
    (0.1, 0.1, 0.9),
    (0.9, 0.9, 0.9),
]


def partition(tree: Octree):
    """Leaves as a set of id sets, independent of arena handles"""
    return {frozenset(tree.node(h).points) for h in tree.leaves()}


@pytest.mark.unit
@pytest.mark.octree
class TestOctreeConfig:
    """Test suite for OctreeConfig"""

    def test_defaults(self):
        config = OctreeConfig()
        assert config.K == 10
        assert config.alpha == 2.0
        assert config.max_depth == 32
        assert config.expansion_factor == 2.0
        assert config.leaf_capacity == 20
        assert config.internal_floor == 5

    def test_floors_applied(self):
        config = OctreeConfig(K=5, alpha=1.5)
        assert config.leaf_capacity == 7
        assert config.internal_floor == 3

    @pytest.mark.parametrize("kwargs", [
        {'K': 0},
        {'alpha': 0.5},
        {'expansion_factor': 1.0},
        {'max_depth': 0},
        {'K': 2.5},
        {'alpha': float('nan')},
    ])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ConfigurationError):
            OctreeConfig(**kwargs)

    def test_from_mapping_rejects_unknown_keys(self):
        with pytest.raises(ConfigurationError):
            OctreeConfig.from_mapping({'K': 4, 'alpha': 2.0, 'max_depth': 8,
                                       'expansion_factor': 2.0, 'beta': 1})

    def test_load_octree_config(self, tmp_path):
        path = tmp_path / "octree.json"
        path.write_text(json.dumps({"K": 4, "alpha": 1.5, "max_depth": 12, "expansion_factor": 3.0}))
        config = load_octree_config(path)
        assert config == OctreeConfig(K=4, alpha=1.5, max_depth=12, expansion_factor=3.0)

    def test_load_octree_config_partial_uses_defaults(self, tmp_path):
        path = tmp_path / "octree.json"
        path.write_text(json.dumps({"K": 100}))
        assert load_octree_config(path).alpha == 2.0

    def test_load_octree_config_unknown_key(self, tmp_path):
        path = tmp_path / "octree.json"
        path.write_text(json.dumps({"K": 4, "leaf_size": 3}))
        with pytest.raises(ConfigurationError):
            load_octree_config(path)

    def test_load_octree_config_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_octree_config(tmp_path / "absent.json")


@pytest.mark.unit
@pytest.mark.octree
class TestCreate:
    """Test suite for octree creation"""

    def test_empty_tree(self):
        tree = create(OctreeConfig(K=10, alpha=2), Aabb.cube(0.0, 1.0))
        assert tree.size == 0
        assert len(tree) == 0
        assert tree.depth() == 0
        assert tree.node(tree.root).is_leaf

    def test_empty_tree_is_admissible(self):
        tree = create(OctreeConfig(), Aabb.cube(0.0, 1.0))
        report = tree.validate_admissibility()
        assert report.ok
        assert report.violations == []

    def test_degenerate_bounds_rejected(self):
        with pytest.raises(InputError):
            create(OctreeConfig(), Aabb((0, 0, 0), (1, 0, 1)))

    def test_inverted_bounds_rejected(self):
        with pytest.raises(InputError):
            Aabb((1, 0, 0), (0, 1, 1))


@pytest.mark.unit
@pytest.mark.octree
class TestInsert:
    """Test suite for insertion and splitting"""

    def test_single_point(self):
        tree = create(OctreeConfig(), Aabb.cube(0.0, 1.0))
        tree.insert(7, (0.5, 0.5, 0.5))
        assert tree.size == 1
        root = tree.node(tree.root)
        assert root.is_leaf
        assert root.points == {7: (0.5, 0.5, 0.5)}
        assert tree.position(7) == (0.5, 0.5, 0.5)
        assert tree.leaf_of(7) == tree.root

    def test_split_on_overflow(self):
        tree = create(OctreeConfig(K=2, alpha=2), Aabb.cube(0.0, 1.0))
        for i, p in enumerate(SPREAD):
            tree.insert(i, p)
        root = tree.node(tree.root)
        assert not root.is_leaf
        assert tree.depth() >= 1
        assert root.count == 5
        for h in tree.leaves():
            assert len(tree.node(h).points) <= 4
        assert tree.validate_admissibility().ok

    def test_sparse_children(self):
        tree = create(OctreeConfig(K=2, alpha=2), Aabb.cube(0.0, 1.0))
        for i, p in enumerate(SPREAD):
            tree.insert(i, p)
        children = tree.node(tree.root).children
        assert sum(1 for c in children if c != NO_CHILD) == 5

    def test_duplicate_id(self):
        tree = create(OctreeConfig(), Aabb.cube(0.0, 1.0))
        tree.insert(1, (0.1, 0.2, 0.3))
        with pytest.raises(DuplicateIdError):
            tree.insert(1, (0.4, 0.5, 0.6))
        assert tree.size == 1

    @pytest.mark.parametrize("pos", [
        (float('nan'), 0.0, 0.0),
        (0.0, float('inf'), 0.0),
        (0.0, 0.0),
        "abc",
    ])
    def test_invalid_position(self, pos):
        tree = create(OctreeConfig(), Aabb.cube(0.0, 1.0))
        with pytest.raises(InputError):
            tree.insert(0, pos)

    @pytest.mark.parametrize("bad_id", [-1, 1.5, "3", True])
    def test_invalid_id(self, bad_id):
        tree = create(OctreeConfig(), Aabb.cube(0.0, 1.0))
        with pytest.raises(InputError):
            tree.insert(bad_id, (0.1, 0.1, 0.1))

    def test_insert_outside_bounds(self, tree_factory, rng):
        tree = tree_factory(rng.random((100, 3)), K=2, alpha=2)
        before = range_query(tree, (0.5, 0.5, 0.5), 0.3)
        tree.insert(1000, (3.5, -2.0, 0.5))
        assert tree.bounds.contains((3.5, -2.0, 0.5))
        assert range_query(tree, (0.5, 0.5, 0.5), 0.3) == before
        assert tree.validate_admissibility().ok

    def test_points_on_root_upper_faces(self):
        tree = create(OctreeConfig(K=1, alpha=1), Aabb.cube(0.0, 1.0))
        corners = [(1.0, 1.0, 1.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.5), (0.5, 0.5, 1.0), (0.0, 0.0, 0.0)]
        for i, p in enumerate(corners):
            tree.insert(i, p)
        assert tree.bounds == Aabb.cube(0.0, 1.0)
        assert tree.validate_admissibility().ok

    def test_depth_capped_leaf(self):
        tree = create(OctreeConfig(K=1, alpha=1, max_depth=4), Aabb.cube(0.0, 1.0))
        for i in range(10):
            tree.insert(i, (0.3, 0.3, 0.3))
        report = tree.validate_admissibility()
        assert report.ok
        assert report.depth_capped == 1
        stats = tree.stats()
        assert stats.depth == 4
        assert stats.depth_capped_leaves == 1
        assert stats.max_leaf_occupancy == 10

    def test_bulk_load(self, rng):
        points = rng.random((300, 3)) * 10 - 5
        tree = create(OctreeConfig(K=4, alpha=2), Aabb.cube(0.0, 1.0))
        tree.bulk_load(enumerate(points.tolist()))
        assert tree.size == 300
        assert all(tree.bounds.contains(p) for p in points.tolist())
        assert tree.validate_admissibility().ok

    def test_bulk_load_duplicate_is_atomic(self):
        tree = create(OctreeConfig(), Aabb.cube(0.0, 1.0))
        with pytest.raises(DuplicateIdError):
            tree.bulk_load([(1, (0.1, 0.1, 0.1)), (1, (0.2, 0.2, 0.2))])
        assert tree.size == 0


@pytest.mark.unit
@pytest.mark.octree
class TestRemove:
    """Test suite for removal and collapsing"""

    def test_insert_then_remove(self):
        tree = create(OctreeConfig(), Aabb.cube(0.0, 1.0))
        tree.insert(3, (0.2, 0.2, 0.2))
        tree.remove(3)
        assert tree.size == 0
        assert 3 not in tree
        assert range_query(tree, (0.2, 0.2, 0.2), 10.0) == []
        assert k_nearest(tree, (0.2, 0.2, 0.2), 3) == []

    def test_collapse_at_internal_floor(self):
        tree = create(OctreeConfig(K=4, alpha=1), Aabb.cube(0.0, 1.0))
        for i, p in enumerate(SPREAD):
            tree.insert(i, p)
        assert not tree.node(tree.root).is_leaf
        tree.remove(4)
        root = tree.node(tree.root)
        assert root.is_leaf
        assert set(root.points) == {0, 1, 2, 3}
        assert all(tree.leaf_of(i) == tree.root for i in range(4))
        assert tree.validate_admissibility().ok

    def test_empty_leaf_pruned(self):
        tree = create(OctreeConfig(K=2, alpha=2), Aabb.cube(0.0, 1.0))
        for i, p in enumerate(SPREAD):
            tree.insert(i, p)
        tree.remove(0)
        assert tree.node(tree.root).children[0] == NO_CHILD
        assert tree.validate_admissibility().ok

    def test_freed_handles_reused(self):
        tree = create(OctreeConfig(K=4, alpha=1), Aabb.cube(0.0, 1.0))
        for i, p in enumerate(SPREAD):
            tree.insert(i, p)
        arena = len(tree._nodes)
        tree.remove(4)
        tree.insert(4, SPREAD[4])
        assert len(tree._nodes) == arena

    def test_remove_unknown(self):
        tree = create(OctreeConfig(), Aabb.cube(0.0, 1.0))
        with pytest.raises(NotFoundError):
            tree.remove(42)

    def test_collapsed_empty_node_detached(self):
        tree = create(OctreeConfig(K=1, alpha=2), Aabb.cube(0.0, 1.0))
        cluster = [(0.1, 0.1, 0.1), (0.2, 0.1, 0.1), (0.15, 0.2, 0.1)]
        for i, p in enumerate(cluster):
            tree.insert(i, p)
        tree.insert(3, (0.9, 0.9, 0.9))
        for i in range(3):
            tree.remove(i)
        root = tree.node(tree.root)
        assert root.children[0] == NO_CHILD
        assert all(tree.node(h).count > 0 for h in tree.leaves() if h != tree.root)
        assert tree.validate_admissibility().ok
        assert [pid for pid, _ in range_query(tree, (0.9, 0.9, 0.9), 0.0)] == [3]

    def test_no_empty_leaves_after_removals_and_moves(self, tree_factory, rng):
        points = rng.random((300, 3))
        tree = tree_factory(points, K=1, alpha=2)
        for i in rng.permutation(300)[:250].tolist():
            tree.remove(i)
        for i in list(tree.ids()):
            tree.update_position(i, tuple(rng.random(3).tolist()))
        assert all(tree.node(h).count > 0 for h in tree.leaves() if h != tree.root)
        assert tree.validate_admissibility().ok


@pytest.mark.unit
@pytest.mark.octree
class TestUpdatePosition:
    """Test suite for localized moves"""

    def test_move_within_leaf(self):
        tree = create(OctreeConfig(), Aabb.cube(0.0, 1.0))
        for i, p in enumerate(SPREAD):
            tree.insert(i, p)
        handles = sorted(tree.leaves())
        leaf = tree.leaf_of(2)
        tree.update_position(2, (0.2, 0.8, 0.2))
        assert sorted(tree.leaves()) == handles
        assert tree.leaf_of(2) == leaf
        assert tree.position(2) == (0.2, 0.8, 0.2)
        assert tree.node(leaf).points[2] == (0.2, 0.8, 0.2)

    def test_move_across_midplane(self):
        moved = create(OctreeConfig(K=2, alpha=2), Aabb.cube(0.0, 1.0))
        reference = create(OctreeConfig(K=2, alpha=2), Aabb.cube(0.0, 1.0))
        for i, p in enumerate(SPREAD):
            moved.insert(i, p)
            reference.insert(i, p)

        moved.update_position(0, (0.6, 0.1, 0.1))
        reference.remove(0)
        reference.insert(0, (0.6, 0.1, 0.1))

        assert moved.size == 5
        assert moved.node(moved.root).count == 5
        assert moved.leaf_of(0) == moved.leaf_of(1)
        assert partition(moved) == partition(reference)
        assert moved.validate_admissibility().ok

    def test_move_outside_bounds_matches_remove_insert(self, tree_factory, rng):
        points = rng.random((200, 3))
        moved = tree_factory(points, K=4, alpha=2)
        reference = tree_factory(points, K=4, alpha=2)
        target = (2.7, 0.5, -1.2)

        moved.update_position(17, target)
        reference.remove(17)
        reference.insert(17, target)

        assert dict(moved.items()) == dict(reference.items())
        for center in [(0.5, 0.5, 0.5), target, (0.0, 1.0, 0.0)]:
            assert range_query(moved, center, 0.4) == range_query(reference, center, 0.4)
            assert k_nearest(moved, center, 8) == k_nearest(reference, center, 8)
        assert moved.validate_admissibility().ok

    def test_move_matches_remove_insert_queries(self, tree_factory, rng):
        points = rng.random((400, 3))
        moved = tree_factory(points, K=3, alpha=1.5)
        reference = tree_factory(points, K=3, alpha=1.5)
        for point_id in range(0, 400, 7):
            target = rng.random(3).tolist()
            moved.update_position(point_id, target)
            reference.remove(point_id)
            reference.insert(point_id, target)
        assert moved.validate_admissibility().ok
        assert build_neighbor_lists(moved, 0.1).lists == build_neighbor_lists(reference, 0.1).lists

    def test_size_unchanged(self, tree_factory, rng):
        tree = tree_factory(rng.random((50, 3)), K=2, alpha=2)
        tree.update_position(3, (0.99, 0.01, 0.5))
        assert tree.size == 50

    def test_move_unknown(self):
        tree = create(OctreeConfig(), Aabb.cube(0.0, 1.0))
        with pytest.raises(NotFoundError):
            tree.update_position(5, (0.1, 0.1, 0.1))

    def test_move_to_non_finite(self):
        tree = create(OctreeConfig(), Aabb.cube(0.0, 1.0))
        tree.insert(5, (0.1, 0.1, 0.1))
        with pytest.raises(InputError):
            tree.update_position(5, (0.1, float('nan'), 0.1))
        assert tree.position(5) == (0.1, 0.1, 0.1)


@pytest.mark.unit
@pytest.mark.octree
class TestExpandBounds:
    """Test suite for dynamic bounding volume"""

    def test_target_inside_is_noop(self, tree_factory, rng):
        tree = tree_factory(rng.random((60, 3)), K=2, alpha=2)
        before = partition(tree)
        root = tree.root
        tree.expand_bounds((0.5, 0.5, 0.5))
        assert tree.root == root
        assert partition(tree) == before

    def test_single_doubling(self):
        tree = create(OctreeConfig(expansion_factor=2), Aabb.cube(0.0, 1.0))
        tree.expand_bounds((1.5, 0.5, 0.5))
        assert tree.bounds.min[0] == 0.0
        assert tree.bounds.max[0] == 2.0

    def test_growth_toward_negative_axis(self, tree_factory, rng):
        tree = tree_factory(rng.random((40, 3)), K=2, alpha=2)
        tree.expand_bounds((-0.5, 0.5, 0.5))
        assert tree.bounds.min[0] == -1.0
        assert tree.bounds.max[0] == 1.0
        assert tree.validate_admissibility().ok

    def test_old_root_becomes_octant(self, tree_factory, rng):
        tree = tree_factory(rng.random((40, 3)), K=2, alpha=2)
        old_root = tree.root
        before = partition(tree)
        tree.expand_bounds((1.5, 1.5, 1.5))
        assert tree.node(old_root).parent == tree.root
        assert partition(tree) == before

    def test_points_on_former_upper_face(self):
        tree = create(OctreeConfig(K=1, alpha=1), Aabb.cube(0.0, 1.0))
        tree.insert(0, (0.25, 0.25, 0.25))
        tree.insert(1, (1.0, 0.5, 0.5))
        tree.insert(2, (1.5, 0.2, 0.2))
        assert tree.bounds == Aabb.cube(0.0, 2.0)
        assert tree.validate_admissibility().ok
        assert [pid for pid, _ in range_query(tree, (1.0, 0.5, 0.5), 0.0)] == [1]

    def test_face_points_found_after_repeated_growth(self, rng):
        tree = create(OctreeConfig(K=2, alpha=2), Aabb.cube(0.0, 1.0))
        interior = rng.random((80, 3)).tolist()
        face = [(1.0, y, z) for y, z in rng.random((20, 2)).tolist()]
        corner = [(1.0, 1.0, 1.0)]
        for i, p in enumerate(interior + face + corner):
            tree.insert(i, p)
        tree.expand_bounds((1.5, 0.5, 0.5))
        tree.expand_bounds((3.5, 3.5, 3.5))
        assert tree.bounds == Aabb.cube(0.0, 4.0)
        assert tree.validate_admissibility().ok
        for i, p in enumerate(interior + face + corner):
            assert [pid for pid, _ in range_query(tree, p, 0.0)] == [i]
            assert tree.node(tree.leaf_of(i)).points[i] == tuple(p)

    def test_queries_unchanged_after_expansion(self, tree_factory, rng):
        tree = tree_factory(rng.random((300, 3)), K=4, alpha=2)
        queries = rng.random((20, 3)).tolist()
        before = [range_query(tree, q, 0.2) for q in queries]
        tree.expand_bounds((5.0, -3.0, 2.0))
        assert [range_query(tree, q, 0.2) for q in queries] == before
        assert tree.validate_admissibility().ok

    def test_non_doubling_factor_rebuilds(self, rng):
        tree = create(OctreeConfig(K=2, alpha=2, expansion_factor=3), Aabb.cube(0.0, 1.0))
        points = rng.random((50, 3)).tolist()
        for i, p in enumerate(points):
            tree.insert(i, p)
        tree.insert(50, (4.0, 0.5, 0.5))
        assert tree.bounds.max[0] >= 4.0
        assert tree.size == 51
        assert tree.validate_admissibility().ok
        assert all(tree.position(i) == tuple(p) for i, p in enumerate(points))


@pytest.mark.unit
@pytest.mark.octree
class TestValidateAdmissibility:
    """Test suite for the admissibility report"""

    def test_internal_node_at_floor_reported(self):
        tree = create(OctreeConfig(K=4, alpha=1), Aabb.cube(0.0, 1.0))
        for i, p in enumerate(SPREAD):
            tree.insert(i, p)
        leaf_h = tree.leaf_of(4)
        # detach one point behind the tree's back so the root sits at the floor
        leaf = tree.node(leaf_h)
        del leaf.points[4]
        leaf.count -= 1
        tree.node(tree.root).count -= 1
        del tree._pos[4]
        del tree._leaf_of[4]

        report = tree.validate_admissibility()
        assert len(report.violations) == 1
        assert "internal floor" in report.violations[0]

    def test_count_mismatch_reported(self, tree_factory, rng):
        tree = tree_factory(rng.random((30, 3)), K=2, alpha=2)
        tree.node(tree.root).count += 1
        assert not tree.validate_admissibility().ok

    def test_registry_mismatch_reported(self, tree_factory, rng):
        tree = tree_factory(rng.random((30, 3)), K=2, alpha=2)
        tree._pos[0] = (0.5, 0.5, 0.5) if tree._pos[0] != (0.5, 0.5, 0.5) else (0.4, 0.4, 0.4)
        assert not tree.validate_admissibility().ok


@pytest.mark.octree
class TestRandomizedOperations:
    """Property tests over random insert/move/remove sequences"""

    @pytest.mark.parametrize("K,alpha", [(1, 1.0), (2, 2.0), (4, 1.0), (10, 2.0), (10, 1.0)])
    def test_admissible_and_equivalent(self, K, alpha):
        tree = create(OctreeConfig(K=K, alpha=alpha), Aabb.cube(0.0, 1.0))
        workload = MixedWorkload(tree, seed=12345)
        flat = workload.positions
        for _ in range(5):
            workload.run(600)
            report = tree.validate_admissibility()
            assert report.violations == []
            assert report.depth_capped == 0
            assert dict(tree.items()) == flat
            assert tree.size == len(flat) == tree.node(tree.root).count

    @pytest.mark.slow
    @pytest.mark.timeout(600)
    @pytest.mark.parametrize("K,alpha", [(10, 1.0), (10, 2.0), (100, 1.0), (100, 2.0), (1000, 1.0), (1000, 2.0)])
    def test_long_sequences(self, K, alpha):
        tree = create(OctreeConfig(K=K, alpha=alpha), Aabb.cube(0.0, 1.0))
        workload = MixedWorkload(tree, seed=K * 10 + int(alpha))
        workload.run(100_000)
        flat = workload.positions
        report = tree.validate_admissibility()
        assert report.violations == []
        assert report.depth_capped == 0
        assert dict(tree.items()) == flat


@pytest.mark.unit
@pytest.mark.octree
class TestStatsAndRebuild:
    """Test suite for structural statistics and arena rebuild"""

    def test_stats_counts(self, tree_factory, rng):
        tree = tree_factory(rng.random((500, 3)), K=4, alpha=2)
        stats = tree.stats()
        assert stats.size == 500
        assert stats.node_count == stats.leaf_count + stats.internal_count
        assert stats.leaf_count == len(list(tree.leaves()))
        assert stats.max_leaf_occupancy <= 8
        assert stats.approx_memory_bytes > 0

    def test_rebuild_preserves_points(self, tree_factory, rng):
        tree = tree_factory(rng.random((200, 3)), K=4, alpha=2)
        before = dict(tree.items())
        for i in range(0, 200, 3):
            tree.remove(i)
            del before[i]
        tree.rebuild()
        assert dict(tree.items()) == before
        assert tree._free == []
        assert tree.validate_admissibility().ok


@pytest.mark.octree
class TestPropertySuite:
    """Test suite for the reusable workload and audit helpers"""

    def test_workload_counts_and_mirror(self):
        tree = create(OctreeConfig(K=4, alpha=2.0), Aabb.cube(0.0, 1.0))
        workload = MixedWorkload(tree, seed=3)
        workload.run(500)
        assert sum(workload.counts.values()) == 500
        assert workload.counts['insert'] > workload.counts['remove']
        assert dict(tree.items()) == workload.positions

    def test_workload_seeded(self):
        def final(seed):
            tree = create(OctreeConfig(K=4, alpha=2.0), Aabb.cube(0.0, 1.0))
            workload = MixedWorkload(tree, seed=seed)
            workload.run(300)
            return workload.positions
        assert final(8) == final(8)
        assert final(8) != final(9)

    def test_workload_continues_existing_ids(self, tree_factory, rng):
        tree = tree_factory(rng.random((20, 3)), K=4, alpha=2)
        workload = MixedWorkload(tree, seed=0)
        assert workload.next_id == 20
        workload.run(100)
        assert dict(tree.items()) == workload.positions

    def test_oracle_agreement(self):
        tree = create(OctreeConfig(K=3, alpha=1.0), Aabb.cube(0.0, 1.0))
        MixedWorkload(tree, seed=4).run(800)
        assert oracle_mismatches(tree, queries=20, seed=1) == 0

    def test_oracle_detects_corruption(self):
        tree = create(OctreeConfig(K=3, alpha=1.0), Aabb.cube(0.0, 1.0))
        MixedWorkload(tree, seed=4).run(400)
        for point_id, (x, y, z) in list(tree.items()):
            tree._pos[point_id] = (x + 5.0, y, z)
        assert oracle_mismatches(tree, queries=20, seed=1) > 0

    @pytest.mark.parametrize("K,alpha", [(2, 1.0), (10, 2.0)])
    def test_check_setting_passes(self, K, alpha):
        result = check_setting(OctreeConfig(K=K, alpha=alpha), ops=1000, seed=2, queries=10)
        assert result.passed
        row = result.to_row()
        assert row['status'] == 'pass'
        assert row['violations'] == 0 and row['oracle_mismatches'] == 0
        assert row['size'] == result.size > 0
        assert sum(result.counts.values()) == 1000

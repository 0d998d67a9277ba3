"""
Dynamic (K, alpha)-admissible Octree

Mutable 3D point index with localized insertion, deletion and movement.
No leaf holds more than floor(alpha*K) points (leaves at max_depth excepted)
and every internal node holds more than floor(K/alpha) points. Leaves that
overflow are split into octants; internal nodes that fall to the floor are
collapsed back into a single leaf.

Nodes live in an index-addressed arena with a free list. A registry maps
every point id to its leaf handle and coordinates, so updates start at the
point's leaf instead of at the root.

Mutations require exclusive access; any number of read-only queries may run
between mutations.
"""

import logging
import math
import sys
from dataclasses import dataclass, field, asdict
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Any

from src.core.error_handler import (
    ConfigurationError, DuplicateIdError, InputError, NotFoundError
)
from src.core.config_manager import load_mapping
from src.core.validation_utils import Point3, as_point, get_validator
from .geometry import (
    Aabb, NUM_OCTANTS, midpoint, octant_index, octant_bounds
)

logger = logging.getLogger(__name__)

NO_CHILD = -1

_CONFIG_SCHEMA = {
    'K': ['required', 'integer', 'at_least_one'],
    'alpha': ['required', 'finite', 'at_least_one'],
    'max_depth': ['required', 'integer', 'at_least_one'],
    'expansion_factor': ['required', 'finite', 'greater_than_one'],
}


@dataclass(frozen=True)
class OctreeConfig:
    """(K, alpha) balance parameters, depth cap and bounds growth multiplier"""
    K: int = 10
    alpha: float = 2.0
    max_depth: int = 32
    expansion_factor: float = 2.0

    def __post_init__(self):
        result = get_validator().validate_dict(asdict(self), _CONFIG_SCHEMA)
        if not result.is_valid:
            raise ConfigurationError("Invalid octree configuration: " + "; ".join(result.errors),
                                     details={'errors': result.errors})
        object.__setattr__(self, 'K', int(self.K))
        object.__setattr__(self, 'alpha', float(self.alpha))
        object.__setattr__(self, 'max_depth', int(self.max_depth))
        object.__setattr__(self, 'expansion_factor', float(self.expansion_factor))

    @property
    def leaf_capacity(self) -> int:
        return math.floor(self.alpha * self.K)

    @property
    def internal_floor(self) -> int:
        return math.floor(self.K / self.alpha)

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "OctreeConfig":
        """Build from a mapping such as the JSON config file; unknown keys are rejected."""
        result = get_validator().validate_dict(data, _CONFIG_SCHEMA, allow_unknown=False)
        if not result.is_valid:
            raise ConfigurationError("Invalid octree configuration: " + "; ".join(result.errors),
                                     details={'errors': result.errors})
        return cls(**data)

    @classmethod
    def from_settings(cls, settings: Any) -> "OctreeConfig":
        """Build from core.config_manager.OctreeSettings"""
        return cls(K=settings.K, alpha=settings.alpha, max_depth=settings.max_depth,
                   expansion_factor=settings.expansion_factor)


class Node:
    """
    Arena node.

    A leaf has `points` (id -> coordinates) and `children` None; an internal
    node has eight child handles (NO_CHILD for an absent, empty octant) and
    `points` None. `center` is the split point, normally the box midpoint.
    """

    __slots__ = ('lo', 'hi', 'center', 'parent', 'children', 'points', 'count')

    def __init__(self, lo: Point3, hi: Point3, parent: int, center: Optional[Point3] = None):
        self.lo = lo
        self.hi = hi
        self.center = center if center is not None else midpoint(lo, hi)
        self.parent = parent
        self.children: Optional[List[int]] = None
        self.points: Optional[Dict[int, Point3]] = {}
        self.count = 0

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    @property
    def bounds(self) -> Aabb:
        return Aabb(self.lo, self.hi)

    def child_handles(self) -> List[int]:
        if self.children is None:
            return []
        return [c for c in self.children if c != NO_CHILD]


@dataclass
class AdmissibilityReport:
    """Outcome of validate_admissibility"""
    violations: List[str] = field(default_factory=list)
    depth_capped_leaves: List[int] = field(default_factory=list)
    nodes_checked: int = 0
    points_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def depth_capped(self) -> int:
        return len(self.depth_capped_leaves)


@dataclass
class OctreeStats:
    """Structural summary of an octree"""
    size: int
    node_count: int
    leaf_count: int
    internal_count: int
    depth: int
    max_leaf_occupancy: int
    depth_capped_leaves: int
    approx_memory_bytes: int


class Octree:
    """
    Dynamic (K, alpha)-admissible octree over caller-identified 3D points.

    Point ids are non-negative integers chosen by the caller; they stay
    stable across moves and are never invented by the tree.
    """

    def __init__(self, config: OctreeConfig, initial_bounds: Aabb):
        if not isinstance(config, OctreeConfig):
            raise ConfigurationError("config must be an OctreeConfig", config_value=config)
        if not isinstance(initial_bounds, Aabb):
            initial_bounds = Aabb(*initial_bounds)
        if initial_bounds.is_degenerate():
            raise InputError("initial bounds must have positive extent on every axis",
                             field_name='initial_bounds', field_value=initial_bounds)
        self.config = config
        self._cap = config.leaf_capacity
        self._floor = config.internal_floor
        self._nodes: List[Optional[Node]] = []
        self._free: List[int] = []
        self._leaf_of: Dict[int, int] = {}
        self._pos: Dict[int, Point3] = {}
        self.root = self._alloc(initial_bounds.min, initial_bounds.max, NO_CHILD)

    # ------------------------------------------------------------------
    # read-only access

    @property
    def size(self) -> int:
        return len(self._pos)

    def __len__(self) -> int:
        return len(self._pos)

    def __contains__(self, point_id: int) -> bool:
        return point_id in self._pos

    @property
    def bounds(self) -> Aabb:
        root = self._nodes[self.root]
        return Aabb(root.lo, root.hi)

    def node(self, handle: int) -> Node:
        return self._nodes[handle]

    def ids(self) -> Iterator[int]:
        return iter(self._pos)

    def items(self) -> Iterator[Tuple[int, Point3]]:
        return iter(self._pos.items())

    def position(self, point_id: int) -> Point3:
        try:
            return self._pos[point_id]
        except KeyError:
            raise NotFoundError(point_id)

    def leaf_of(self, point_id: int) -> int:
        try:
            return self._leaf_of[point_id]
        except KeyError:
            raise NotFoundError(point_id)

    def leaves(self) -> Iterator[int]:
        stack = [self.root]
        while stack:
            h = stack.pop()
            node = self._nodes[h]
            if node.children is None:
                yield h
            else:
                stack.extend(c for c in node.children if c != NO_CHILD)

    def node_depth(self, handle: int) -> int:
        depth = 0
        parent = self._nodes[handle].parent
        while parent != NO_CHILD:
            depth += 1
            parent = self._nodes[parent].parent
        return depth

    def depth(self) -> int:
        """Depth of the deepest leaf (0 for a single-leaf tree)."""
        best = 0
        stack = [(self.root, 0)]
        while stack:
            h, d = stack.pop()
            node = self._nodes[h]
            if node.children is None:
                best = max(best, d)
            else:
                stack.extend((c, d + 1) for c in node.children if c != NO_CHILD)
        return best

    # ------------------------------------------------------------------
    # mutation

    def insert(self, point_id: int, pos) -> None:
        """
        Insert a point.

        Raises:
            DuplicateIdError: point_id is already live
            InputError: point_id is not a non-negative integer or pos is not finite
        """
        self._check_id(point_id)
        if point_id in self._pos:
            raise DuplicateIdError(point_id)
        p = as_point(pos)
        if not self._in_root(p):
            self.expand_bounds(p)
        self._insert_from(self.root, point_id, p, count_start=True)

    def remove(self, point_id: int) -> None:
        """
        Remove a point and collapse any ancestor that drops to the internal floor.

        Raises:
            NotFoundError: point_id is not live
        """
        leaf_h = self._leaf_of.pop(point_id, None)
        if leaf_h is None:
            raise NotFoundError(point_id)
        del self._pos[point_id]
        leaf = self._nodes[leaf_h]
        del leaf.points[point_id]

        h = leaf_h
        while h != NO_CHILD:
            node = self._nodes[h]
            node.count -= 1
            h = node.parent

        self._rebalance_path(leaf_h, stop=NO_CHILD)

    def update_position(self, point_id: int, new_pos) -> None:
        """
        Move a point.

        Within its own leaf only the stored coordinate changes; otherwise the
        point migrates through the lowest common ancestor of its old leaf and
        the new position, touching only nodes on those two paths.

        Raises:
            NotFoundError: point_id is not live
            InputError: new_pos is not finite
        """
        if point_id not in self._pos:
            raise NotFoundError(point_id)
        p = as_point(new_pos, "new_pos")
        if not self._in_root(p):
            self.expand_bounds(p)
        self._move(point_id, p)

    def expand_bounds(self, target) -> None:
        """
        Grow the root box until it contains target.

        Each growth step scales the box by expansion_factor, anchored at the
        corner facing away from target. With the default factor of 2 the old
        root becomes an octant of the new root and no point changes leaf;
        other factors rebuild the tree inside the grown box.
        """
        p = as_point(target, "target")
        while not self._in_root(p):
            self._grow_toward(p)

    def bulk_load(self, points: Iterable[Tuple[int, Any]]) -> None:
        """Insert many (id, pos) pairs with a single up-front bounds expansion."""
        batch = []
        for point_id, pos in points:
            self._check_id(point_id)
            batch.append((point_id, as_point(pos)))
        if not batch:
            return
        seen = set()
        for point_id, _ in batch:
            if point_id in self._pos or point_id in seen:
                raise DuplicateIdError(point_id)
            seen.add(point_id)
        lo = tuple(min(p[a] for _, p in batch) for a in range(3))
        hi = tuple(max(p[a] for _, p in batch) for a in range(3))
        self.expand_bounds(lo)
        self.expand_bounds(hi)
        for point_id, p in batch:
            self._insert_from(self.root, point_id, p, count_start=True)

    def rebuild(self, bounds: Optional[Aabb] = None) -> None:
        """Rebuild the node arena from the registry inside bounds (default: current root box)."""
        root = self._nodes[self.root]
        lo, hi = (bounds.min, bounds.max) if bounds is not None else (root.lo, root.hi)
        items = list(self._pos.items())
        self._nodes = []
        self._free = []
        self._leaf_of = {}
        self._pos = {}
        self.root = self._alloc(lo, hi, NO_CHILD)
        for point_id, p in items:
            if not self._in_root(p):
                self.expand_bounds(p)
            self._insert_from(self.root, point_id, p, count_start=True)
        logger.debug(f"Rebuilt octree with {len(items)} points")

    # ------------------------------------------------------------------
    # validation and statistics

    def validate_admissibility(self) -> AdmissibilityReport:
        """
        Check (K, alpha)-admissibility, subtree counts, containment and
        registry agreement. Leaves at max_depth are exempt from the leaf cap
        and reported as depth-capped instead.
        """
        report = AdmissibilityReport()
        seen: Dict[int, int] = {}
        max_depth = self.config.max_depth

        root = self._nodes[self.root]
        if root.parent != NO_CHILD:
            report.violations.append(f"root {self.root} has a parent")

        stack = [(self.root, 0)]
        while stack:
            h, depth = stack.pop()
            node = self._nodes[h]
            report.nodes_checked += 1

            if node.children is None:
                if node.count != len(node.points):
                    report.violations.append(
                        f"leaf {h}: subtree_count {node.count} != {len(node.points)} stored points")
                if len(node.points) > self._cap:
                    if depth >= max_depth:
                        report.depth_capped_leaves.append(h)
                    else:
                        report.violations.append(
                            f"leaf {h} at depth {depth}: {len(node.points)} points > leaf capacity {self._cap}")
                for point_id, p in node.points.items():
                    report.points_checked += 1
                    if point_id in seen:
                        report.violations.append(f"point {point_id} stored in leaves {seen[point_id]} and {h}")
                    seen[point_id] = h
                    if self._leaf_of.get(point_id) != h:
                        report.violations.append(
                            f"point {point_id}: registry leaf {self._leaf_of.get(point_id)} != {h}")
                    if self._pos.get(point_id) != p:
                        report.violations.append(f"point {point_id}: registry coordinates disagree with leaf {h}")
                    if not self._in_node(node, p):
                        report.violations.append(f"point {point_id} lies outside leaf {h} bounds")
            else:
                children = [c for c in node.children if c != NO_CHILD]
                if not children:
                    report.violations.append(f"internal node {h} has no children")
                total = 0
                for index, c in enumerate(node.children):
                    if c == NO_CHILD:
                        continue
                    child = self._nodes[c]
                    total += child.count
                    if child.parent != h:
                        report.violations.append(f"node {c}: parent {child.parent} != {h}")
                    exp_lo, exp_hi = octant_bounds(node.lo, node.center, node.hi, index)
                    if child.lo != exp_lo or child.hi != exp_hi:
                        report.violations.append(f"node {c}: bounds do not match octant {index} of {h}")
                    stack.append((c, depth + 1))
                if total != node.count:
                    report.violations.append(
                        f"internal node {h}: subtree_count {node.count} != children total {total}")
                if node.count <= self._floor:
                    report.violations.append(
                        f"internal node {h}: subtree_count {node.count} <= internal floor {self._floor}")

        if len(seen) != len(self._pos) or len(self._leaf_of) != len(self._pos):
            report.violations.append(
                f"registry holds {len(self._pos)} ids but leaves hold {len(seen)}")
        if root.count != len(self._pos):
            report.violations.append(f"root subtree_count {root.count} != size {len(self._pos)}")

        return report

    def stats(self) -> OctreeStats:
        node_count = leaf_count = max_occupancy = capped = 0
        memory = sys.getsizeof(self._nodes) + sys.getsizeof(self._leaf_of) + sys.getsizeof(self._pos)
        depth = 0
        stack = [(self.root, 0)]
        while stack:
            h, d = stack.pop()
            node = self._nodes[h]
            node_count += 1
            memory += sys.getsizeof(node)
            if node.children is None:
                leaf_count += 1
                depth = max(depth, d)
                max_occupancy = max(max_occupancy, len(node.points))
                memory += sys.getsizeof(node.points)
                if len(node.points) > self._cap:
                    capped += 1
            else:
                memory += sys.getsizeof(node.children)
                stack.extend((c, d + 1) for c in node.children if c != NO_CHILD)
        return OctreeStats(
            size=len(self._pos),
            node_count=node_count,
            leaf_count=leaf_count,
            internal_count=node_count - leaf_count,
            depth=depth,
            max_leaf_occupancy=max_occupancy,
            depth_capped_leaves=capped,
            approx_memory_bytes=memory,
        )

    # ------------------------------------------------------------------
    # internals

    @staticmethod
    def _check_id(point_id: int) -> None:
        if isinstance(point_id, bool) or not isinstance(point_id, int) or point_id < 0:
            raise InputError("point id must be a non-negative integer", field_name='id',
                             field_value=point_id)

    def _alloc(self, lo: Point3, hi: Point3, parent: int, center: Optional[Point3] = None) -> int:
        node = Node(lo, hi, parent, center)
        if self._free:
            h = self._free.pop()
            self._nodes[h] = node
        else:
            h = len(self._nodes)
            self._nodes.append(node)
        return h

    def _release(self, handle: int) -> None:
        self._nodes[handle] = None
        self._free.append(handle)

    def _in_root(self, p: Point3) -> bool:
        root = self._nodes[self.root]
        lo, hi = root.lo, root.hi
        return (lo[0] <= p[0] <= hi[0]) and (lo[1] <= p[1] <= hi[1]) and (lo[2] <= p[2] <= hi[2])

    def _in_node(self, node: Node, p: Point3) -> bool:
        # half-open [lo, hi) except on faces shared with the closed root box
        root_hi = self._nodes[self.root].hi
        for a in range(3):
            c = p[a]
            if c < node.lo[a]:
                return False
            if c >= node.hi[a] and not (c == node.hi[a] and node.hi[a] == root_hi[a]):
                return False
        return True

    def _insert_from(self, start: int, point_id: int, p: Point3, count_start: bool) -> int:
        """Descend from start to the leaf for p, store the point, split if needed."""
        nodes = self._nodes
        h = start
        node = nodes[h]
        if count_start or node.children is None:
            node.count += 1
        while node.children is not None:
            index = octant_index(node.center, p)
            child = node.children[index]
            if child == NO_CHILD:
                lo, hi = octant_bounds(node.lo, node.center, node.hi, index)
                child = self._alloc(lo, hi, h)
                node.children[index] = child
            h = child
            node = nodes[h]
            node.count += 1
        node.points[point_id] = p
        self._leaf_of[point_id] = h
        self._pos[point_id] = p
        if len(node.points) > self._cap:
            depth = self.node_depth(h)
            if depth < self.config.max_depth:
                self._split(h, depth)
        return h

    def _split(self, handle: int, depth: int) -> None:
        """Turn an overflowing leaf into an internal node; recurse into overflowing children."""
        nodes = self._nodes
        node = nodes[handle]
        points = node.points
        node.points = None
        node.children = [NO_CHILD] * NUM_OCTANTS
        for point_id, p in points.items():
            index = octant_index(node.center, p)
            child = node.children[index]
            if child == NO_CHILD:
                lo, hi = octant_bounds(node.lo, node.center, node.hi, index)
                child = self._alloc(lo, hi, handle)
                node.children[index] = child
            leaf = nodes[child]
            leaf.points[point_id] = p
            leaf.count += 1
            self._leaf_of[point_id] = child
        logger.debug(f"Split leaf {handle} at depth {depth} ({len(points)} points)")
        if depth + 1 < self.config.max_depth:
            for child in list(node.children):
                if child != NO_CHILD and nodes[child].count > self._cap:
                    self._split(child, depth + 1)

    def _collapse(self, handle: int) -> None:
        """Turn an internal node into a leaf holding every point of its subtree."""
        nodes = self._nodes
        node = nodes[handle]
        gathered: Dict[int, Point3] = {}
        stack = [c for c in node.children if c != NO_CHILD]
        while stack:
            h = stack.pop()
            child = nodes[h]
            if child.children is None:
                gathered.update(child.points)
            else:
                stack.extend(c for c in child.children if c != NO_CHILD)
            self._release(h)
        node.children = None
        node.points = gathered
        for point_id in gathered:
            self._leaf_of[point_id] = handle
        logger.debug(f"Collapsed node {handle} into a leaf of {len(gathered)} points")

    def _rebalance_path(self, leaf_h: int, stop: int) -> None:
        """
        Restore admissibility after a point left leaf_h. Ancestors strictly
        below `stop` are checked bottom-up; the highest one at or below the
        internal floor absorbs its subtree. The resulting leaf is detached
        from its parent when it is empty.
        """
        nodes = self._nodes
        highest = NO_CHILD
        h = nodes[leaf_h].parent
        while h != stop and h != NO_CHILD:
            if nodes[h].count <= self._floor:
                highest = h
            h = nodes[h].parent
        if highest != NO_CHILD:
            self._collapse(highest)
            leaf_h = highest
        leaf = nodes[leaf_h]
        if leaf.count == 0 and leaf.parent != NO_CHILD:
            parent = nodes[leaf.parent]
            parent.children[parent.children.index(leaf_h)] = NO_CHILD
            self._release(leaf_h)

    def _move(self, point_id: int, p: Point3) -> None:
        nodes = self._nodes
        leaf_h = self._leaf_of[point_id]
        leaf = nodes[leaf_h]
        if self._in_node(leaf, p):
            leaf.points[point_id] = p
            self._pos[point_id] = p
            return

        # lowest ancestor whose box still contains p; the root always does
        anc = leaf.parent
        while anc != self.root and not self._in_node(nodes[anc], p):
            anc = nodes[anc].parent

        del leaf.points[point_id]
        h = leaf_h
        while h != anc:
            node = nodes[h]
            node.count -= 1
            h = node.parent

        self._rebalance_path(leaf_h, stop=anc)
        self._insert_from(anc, point_id, p, count_start=False)

    def _grow_toward(self, p: Point3) -> None:
        nodes = self._nodes
        old_h = self.root
        old = nodes[old_h]
        f = self.config.expansion_factor
        new_lo, new_hi, center = [], [], []
        index = 0
        upward_axes = []
        for a in range(3):
            span = old.hi[a] - old.lo[a]
            if p[a] < old.lo[a]:
                new_lo.append(old.hi[a] - f * span)
                new_hi.append(old.hi[a])
                center.append(old.lo[a])
                index |= 1 << a
            else:
                new_lo.append(old.lo[a])
                new_hi.append(old.lo[a] + f * span)
                center.append(old.hi[a])
                upward_axes.append(a)
        new_lo, new_hi, center = tuple(new_lo), tuple(new_hi), tuple(center)
        logger.debug(f"Expanding root bounds to {new_lo}..{new_hi}")

        if old.children is None:
            old.lo, old.hi = new_lo, new_hi
            old.center = midpoint(new_lo, new_hi)
            return

        if f != 2.0:
            self.rebuild(Aabb(new_lo, new_hi))
            return

        new_h = self._alloc(new_lo, new_hi, NO_CHILD, center=center)
        new_root = self._nodes[new_h]
        new_root.points = None
        new_root.children = [NO_CHILD] * NUM_OCTANTS
        new_root.children[index] = old_h
        new_root.count = old.count
        old.parent = new_h
        self.root = new_h

        # the old root's closed upper faces are now interior split planes
        for point_id in self._face_points(old_h, upward_axes):
            self._move(point_id, self._pos[point_id])

    def _face_points(self, handle: int, axes: List[int]) -> List[int]:
        """Ids lying on the upper faces of node `handle` along `axes`; only nodes touching them are visited."""
        nodes = self._nodes
        hi = nodes[handle].hi
        found = []
        stack = [handle]
        while stack:
            node = nodes[stack.pop()]
            if node.children is None:
                found.extend(point_id for point_id, q in node.points.items()
                             if any(q[a] == hi[a] for a in axes))
                continue
            stack.extend(c for c in node.children
                         if c != NO_CHILD and any(nodes[c].hi[a] == hi[a] for a in axes))
        return found


def create(config: OctreeConfig, initial_bounds: Aabb) -> Octree:
    """Create an empty octree whose root is a single leaf."""
    tree = Octree(config, initial_bounds)
    logger.debug(f"Created octree K={config.K} alpha={config.alpha} bounds={initial_bounds}")
    return tree


def load_octree_config(path) -> OctreeConfig:
    """
    Load an OctreeConfig from a JSON object
    {"K": int, "alpha": float, "max_depth": int, "expansion_factor": float}.

    Raises:
        InputError: file missing or unparsable
        ConfigurationError: unknown keys or invalid values
    """
    data = load_mapping(path)
    defaults = asdict(OctreeConfig())
    unknown = sorted(set(data) - set(defaults))
    if unknown:
        raise ConfigurationError(f"Unknown octree configuration keys: {', '.join(unknown)}",
                                 config_key=unknown[0])
    return OctreeConfig.from_mapping({**defaults, **data})

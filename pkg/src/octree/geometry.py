"""
Geometry primitives for the octree.

Axis-aligned boxes, octant arithmetic and the squared-distance helpers
every query and oracle shares. Octant membership is half-open per axis:
a coordinate equal to a node's split plane belongs to the upper child.
"""

import math
from dataclasses import dataclass
from typing import Tuple

from src.core.error_handler import InputError
from src.core.validation_utils import Point3, as_point

NUM_OCTANTS = 8


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box with min <= max on every axis"""
    min: Point3
    max: Point3

    def __post_init__(self):
        lo = as_point(self.min, "min")
        hi = as_point(self.max, "max")
        if any(lo[a] > hi[a] for a in range(3)):
            raise InputError("Aabb requires min <= max on every axis",
                             field_name='bounds', field_value=(lo, hi))
        object.__setattr__(self, 'min', lo)
        object.__setattr__(self, 'max', hi)

    @classmethod
    def cube(cls, low: float, high: float) -> "Aabb":
        return cls((low, low, low), (high, high, high))

    @property
    def center(self) -> Point3:
        return midpoint(self.min, self.max)

    @property
    def extent(self) -> Point3:
        return (self.max[0] - self.min[0], self.max[1] - self.min[1], self.max[2] - self.min[2])

    @property
    def diagonal(self) -> float:
        return math.sqrt(sq_dist(self.min, self.max))

    def is_degenerate(self) -> bool:
        return any(self.min[a] >= self.max[a] for a in range(3))

    def contains(self, p: Point3) -> bool:
        """Closed containment test."""
        return all(self.min[a] <= p[a] <= self.max[a] for a in range(3))


def midpoint(lo: Point3, hi: Point3) -> Point3:
    return ((lo[0] + hi[0]) * 0.5, (lo[1] + hi[1]) * 0.5, (lo[2] + hi[2]) * 0.5)


def sq_dist(a: Point3, b: Point3) -> float:
    """Squared Euclidean distance; the oracles evaluate the same expression."""
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    dz = a[2] - b[2]
    return dx * dx + dy * dy + dz * dz


def distance(a: Point3, b: Point3) -> float:
    return math.sqrt(sq_dist(a, b))


def box_point_sq_dist(lo: Point3, hi: Point3, p: Point3) -> float:
    """Squared distance from p to the closest point of the box [lo, hi]."""
    total = 0.0
    for a in range(3):
        c = p[a]
        if c < lo[a]:
            d = lo[a] - c
            total += d * d
        elif c > hi[a]:
            d = c - hi[a]
            total += d * d
    return total


def box_box_sq_dist(lo1: Point3, hi1: Point3, lo2: Point3, hi2: Point3) -> float:
    """Squared minimum distance between two boxes (0 when they touch or overlap)."""
    total = 0.0
    for a in range(3):
        if hi1[a] < lo2[a]:
            d = lo2[a] - hi1[a]
            total += d * d
        elif hi2[a] < lo1[a]:
            d = lo1[a] - hi2[a]
            total += d * d
    return total


def octant_index(center: Point3, p: Point3) -> int:
    """Bit a of the index is set when p lies on the upper side of the split plane on axis a."""
    return (p[0] >= center[0]) | ((p[1] >= center[1]) << 1) | ((p[2] >= center[2]) << 2)


def octant_bounds(lo: Point3, center: Point3, hi: Point3, index: int) -> Tuple[Point3, Point3]:
    """Bounds of child `index` of the node [lo, hi] split at center."""
    child_lo = []
    child_hi = []
    for a in range(3):
        if index >> a & 1:
            child_lo.append(center[a])
            child_hi.append(hi[a])
        else:
            child_lo.append(lo[a])
            child_hi.append(center[a])
    return tuple(child_lo), tuple(child_hi)

"""
Structure-Preservation Metrics

Compares an input point set X with an index-aligned latent point set Z:

- neighborhood distortion: mean latent distance over a point's input-space
  k-neighborhood divided by the mean input distance over the same points
- neighborhood Jaccard: overlap of the k-neighbor sets found separately in
  X and in Z
- trajectory curvature: mean second-difference magnitude along sampled
  per-point trajectories

Neighbors come from octree k-nearest queries with the point itself
excluded; ties are broken by id.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.error_handler import DegenerateInputError, InputError
from src.core.validation_utils import Point3, as_point_array
from src.octree import Aabb, Octree, OctreeConfig, create, k_nearest
from src.octree.geometry import sq_dist

logger = logging.getLogger(__name__)


@dataclass
class MetricSummary:
    """Per-point metric values with aggregate statistics"""
    values: np.ndarray
    mean: float
    median: float
    max: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "MetricSummary":
        arr = np.asarray(values, dtype=np.float64)
        if len(arr) == 0:
            return cls(arr, float('nan'), float('nan'), float('nan'))
        return cls(arr, float(arr.mean()), float(np.median(arr)), float(arr.max()))


def _index_tree(points: np.ndarray, config: Optional[OctreeConfig]) -> Octree:
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    pad = np.maximum((hi - lo) * 0.05, 1e-6)
    tree = create(config or OctreeConfig(), Aabb(tuple(lo - pad), tuple(hi + pad)))
    tree.bulk_load(enumerate(points.tolist()))
    return tree


class PairedPointSets:
    """
    Index-aligned input (X) and latent (Z) point sets with one octree each.

    Raises:
        InputError: shape mismatch or fewer than k + 1 points
    """

    def __init__(self, X, Z, k: int = 10, config: Optional[OctreeConfig] = None):
        self.X = as_point_array(X, "X")
        self.Z = as_point_array(Z, "Z")
        if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
            raise InputError("k must be a positive integer", field_name='k', field_value=k)
        if len(self.X) != len(self.Z):
            raise InputError(f"X has {len(self.X)} points but Z has {len(self.Z)}", field_name='Z',
                             field_value=len(self.Z))
        if len(self.X) < k + 1:
            raise InputError(f"at least k + 1 = {k + 1} points are required", field_name='k', field_value=k)
        self.k = int(k)
        self.x_tree = _index_tree(self.X, config)
        self.z_tree = _index_tree(self.Z, config)
        self._x_list = [tuple(p) for p in self.X.tolist()]
        self._z_list = [tuple(p) for p in self.Z.tolist()]

    def __len__(self) -> int:
        return len(self.X)

    def x_neighbors(self, i: int) -> List[Tuple[int, float]]:
        return _neighbors_excluding_self(self.x_tree, self._x_list[i], i, self.k)

    def z_neighbors(self, i: int) -> List[Tuple[int, float]]:
        return _neighbors_excluding_self(self.z_tree, self._z_list[i], i, self.k)


def _neighbors_excluding_self(tree: Octree, p: Point3, i: int, k: int) -> List[Tuple[int, float]]:
    hits = k_nearest(tree, p, k + 1)
    return [hit for hit in hits if hit[0] != i][:k]


def neighborhood_distortion(pairs: PairedPointSets) -> MetricSummary:
    """
    Relative distortion per point over its input-space k-neighborhood.

    Raises:
        DegenerateInputError: all k input-space neighbors of a point coincide with it
    """
    values = []
    z = pairs._z_list
    for i in range(len(pairs)):
        neighbors = pairs.x_neighbors(i)
        x_mean = sum(dist for _, dist in neighbors) / len(neighbors)
        if x_mean == 0.0:
            raise DegenerateInputError(f"point {i} coincides with all of its {pairs.k} input-space neighbors",
                                       point_index=i)
        z_mean = sum(math.sqrt(sq_dist(z[i], z[j])) for j, _ in neighbors) / len(neighbors)
        values.append(z_mean / x_mean)
    return MetricSummary.of(values)


def neighborhood_jaccard(pairs: PairedPointSets) -> MetricSummary:
    """|N_X(i) & N_Z(i)| / |N_X(i) | N_Z(i)| per point, k neighbors in each space"""
    values = []
    for i in range(len(pairs)):
        nx = {j for j, _ in pairs.x_neighbors(i)}
        nz = {j for j, _ in pairs.z_neighbors(i)}
        values.append(len(nx & nz) / len(nx | nz))
    return MetricSummary.of(values)


class Trajectory:
    """
    Time-ordered samples per point, stored as an (N, T, 3) array.

    Raises:
        InputError: ragged or non-finite samples
    """

    def __init__(self, samples, ids: Optional[Sequence[int]] = None):
        arr = np.asarray(samples, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InputError("trajectory samples must have shape (points, T, 3)", field_name='samples',
                             field_value=arr.shape)
        if not np.all(np.isfinite(arr)):
            raise InputError("trajectory samples contain non-finite coordinates", field_name='samples')
        self.samples = arr
        self.ids = list(ids) if ids is not None else list(range(arr.shape[0]))
        if len(self.ids) != arr.shape[0]:
            raise InputError("one id per trajectory is required", field_name='ids')

    @classmethod
    def from_mapping(cls, per_point: Dict[int, Sequence[Sequence[float]]]) -> "Trajectory":
        ids = sorted(per_point)
        lengths = {len(per_point[i]) for i in ids}
        if len(lengths) > 1:
            raise InputError("all trajectories must have the same number of samples",
                             field_name='samples', field_value=sorted(lengths))
        return cls([per_point[i] for i in ids], ids)

    @property
    def steps(self) -> int:
        return self.samples.shape[1]


def trajectory_curvature(traj: Trajectory) -> MetricSummary:
    """
    S_i = (1 / (T - 2)) * sum over interior t of |z(t+1) - 2 z(t) + z(t-1)|.

    Raises:
        InputError: fewer than three samples per point
    """
    if traj.steps < 3:
        raise InputError("trajectory curvature needs at least 3 samples per point", field_name='T',
                         field_value=traj.steps)
    z = traj.samples
    second = z[:, 2:, :] - 2.0 * z[:, 1:-1, :] + z[:, :-2, :]
    values = np.sqrt(np.sum(second * second, axis=2)).sum(axis=1) / (traj.steps - 2)
    return MetricSummary.of(values)


@dataclass
class CellDistortion:
    """Mean distortion of the points held by one input-space octree leaf"""
    lo: Point3
    hi: Point3
    count: int
    mean_distortion: float


def cell_distortion_map(pairs: PairedPointSets,
                        distortion: Optional[MetricSummary] = None) -> List[CellDistortion]:
    """Per-leaf mean distortion over the input-space octree, ordered by leaf lower corner"""
    if distortion is None:
        distortion = neighborhood_distortion(pairs)
    cells = []
    tree = pairs.x_tree
    for handle in tree.leaves():
        node = tree.node(handle)
        members = list(node.points)
        if not members:
            continue
        mean = float(np.mean(distortion.values[members]))
        cells.append(CellDistortion(node.lo, node.hi, len(members), mean))
    cells.sort(key=lambda c: (c.lo, c.hi))
    return cells

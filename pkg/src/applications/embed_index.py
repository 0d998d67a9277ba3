"""
Hybrid Embedding Index

High-dimensional vector retrieval in three phases:

1. k-means partitions the vectors into clusters (centroids frozen after build)
2. each cluster gets a rank-3 PCA projection fitted by subspace iteration
3. projected points live in one dynamic octree per cluster

A query probes the nearest clusters, collects 3D k-nearest candidates from
their octrees and re-ranks the union by exact distance in the original
space.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.cluster import KMeans

from src.core.error_handler import DuplicateIdError, InputError
from src.core.logging_manager import performance_monitor
from src.octree import Aabb, Octree, OctreeConfig, create, k_nearest

logger = logging.getLogger(__name__)

Hit = Tuple[int, float]


class EmbeddingStore:
    """Fixed-dimension vectors keyed by non-negative integer id"""

    def __init__(self, dim: int):
        if isinstance(dim, bool) or not isinstance(dim, (int, np.integer)) or dim < 1:
            raise InputError("dim must be a positive integer", field_name='dim', field_value=dim)
        self.dim = int(dim)
        self._vectors: Dict[int, np.ndarray] = {}
        self._ids: List[int] = []
        self._matrix: Optional[np.ndarray] = None

    @classmethod
    def from_arrays(cls, ids: Iterable[int], vectors) -> "EmbeddingStore":
        matrix = np.asarray(vectors, dtype=np.float64)
        if matrix.ndim != 2:
            raise InputError("vectors must be a 2D array", field_name='vectors', field_value=matrix.shape)
        store = cls(matrix.shape[1])
        for point_id, vec in zip(ids, matrix):
            store.add(int(point_id), vec)
        return store

    def check_vector(self, vector) -> np.ndarray:
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise InputError(f"vector must have length {self.dim}", field_name='vector',
                             field_value=vec.shape)
        if not np.all(np.isfinite(vec)):
            raise InputError("vector has non-finite entries", field_name='vector')
        return vec

    def add(self, point_id: int, vector) -> None:
        if isinstance(point_id, bool) or not isinstance(point_id, int) or point_id < 0:
            raise InputError("id must be a non-negative integer", field_name='id', field_value=point_id)
        if point_id in self._vectors:
            raise DuplicateIdError(point_id)
        self._vectors[point_id] = self.check_vector(vector).copy()
        self._ids.append(point_id)
        self._matrix = None

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, point_id: int) -> bool:
        return point_id in self._vectors

    @property
    def ids(self) -> List[int]:
        return list(self._ids)

    def vector(self, point_id: int) -> np.ndarray:
        return self._vectors[point_id]

    def matrix(self) -> np.ndarray:
        """All vectors as rows, in insertion order of `ids`"""
        if self._matrix is None:
            if self._ids:
                self._matrix = np.stack([self._vectors[i] for i in self._ids])
            else:
                self._matrix = np.empty((0, self.dim))
        return self._matrix


def _exact_distances(rows: np.ndarray, query: np.ndarray) -> np.ndarray:
    diff = rows - query
    return np.sqrt(np.sum(diff * diff, axis=1))


def _rank(ids: np.ndarray, dists: np.ndarray, k: int) -> List[Hit]:
    order = np.lexsort((ids, dists))[:k]
    return [(int(ids[i]), float(dists[i])) for i in order]


def exact_search(store: EmbeddingStore, query, k: int) -> List[Hit]:
    """Brute-force top-k by (exact distance, id)"""
    q = store.check_vector(query)
    if len(store) == 0:
        return []
    return _rank(np.asarray(store.ids), _exact_distances(store.matrix(), q), k)


def fit_projection(points: np.ndarray, iterations: int = 30, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rank-3 PCA by subspace iteration on the centered covariance.

    Returns:
        (mean, basis) with basis of shape (D, 3) and orthonormal columns
    """
    mean = points.mean(axis=0)
    centered = points - mean
    dim = points.shape[1]
    rank = min(3, dim)
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((dim, rank)))
    for _ in range(iterations):
        z = centered.T @ (centered @ basis)
        if np.linalg.norm(z) == 0.0:
            break
        basis, _ = np.linalg.qr(z)
    if rank < 3:
        basis = np.hstack([basis, np.zeros((dim, 3 - rank))])
    return mean, basis


@dataclass
class ClusterPartition:
    """One k-means cluster with its projection and octree"""
    centroid: np.ndarray
    mean: np.ndarray
    basis: np.ndarray
    tree: Octree
    ids: List[int] = field(default_factory=list)

    def project(self, vector: np.ndarray) -> Tuple[float, float, float]:
        z = (vector - self.mean) @ self.basis
        return float(z[0]), float(z[1]), float(z[2])


class HybridIndex:
    """
    Cluster partition + per-cluster 3D octrees + exact re-ranking.

    Built with `build`; afterwards centroids stay frozen and inserts go to
    the nearest centroid's cluster.
    """

    def __init__(self, store: EmbeddingStore, clusters: List[ClusterPartition],
                 assignment: Dict[int, int], seed: int):
        self.store = store
        self.clusters = clusters
        self.assignment = assignment
        self.seed = seed
        self.centroids = np.stack([c.centroid for c in clusters])

    @property
    def num_clusters(self) -> int:
        return len(self.clusters)

    def __len__(self) -> int:
        return len(self.store)

    def nearest_clusters(self, vector: np.ndarray, count: int) -> List[int]:
        diff = self.centroids - vector
        sq = np.sum(diff * diff, axis=1)
        return np.argsort(sq, kind='stable')[:count].tolist()

    def insert(self, point_id: int, vector) -> None:
        """
        Assign to the nearest frozen centroid, project, insert into that cluster's octree.

        Raises:
            InputError: duplicate id or wrong dimension
        """
        if point_id in self.store:
            raise DuplicateIdError(point_id)
        vec = self.store.check_vector(vector)
        index = self.nearest_clusters(vec, 1)[0]
        cluster = self.clusters[index]
        cluster.tree.insert(point_id, cluster.project(vec))
        self.store.add(point_id, vec)
        cluster.ids.append(point_id)
        self.assignment[point_id] = index

    def query(self, vector, top_k: int = 10, probe_clusters: int = 3,
              candidate_multiplier: Optional[int] = 10) -> List[Hit]:
        """
        Approximate top_k by exact distance among octree candidates.

        `candidate_multiplier=None` takes every point of each probed cluster.
        """
        for name, value in (('top_k', top_k), ('probe_clusters', probe_clusters)):
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise InputError(f"{name} must be a positive integer", field_name=name, field_value=value)
        if candidate_multiplier is not None and (
                isinstance(candidate_multiplier, bool) or candidate_multiplier < 1):
            raise InputError("candidate_multiplier must be a positive integer",
                             field_name='candidate_multiplier', field_value=candidate_multiplier)
        q = self.store.check_vector(vector)
        if len(self.store) == 0:
            return []

        candidates: List[int] = []
        for index in self.nearest_clusters(q, probe_clusters):
            cluster = self.clusters[index]
            if len(cluster.tree) == 0:
                continue
            if candidate_multiplier is None:
                candidates.extend(cluster.ids)
            else:
                hits = k_nearest(cluster.tree, cluster.project(q), candidate_multiplier * top_k)
                candidates.extend(point_id for point_id, _ in hits)
        if not candidates:
            return []

        ids = np.asarray(candidates, dtype=np.int64)
        rows = np.stack([self.store.vector(i) for i in candidates])
        return _rank(ids, _exact_distances(rows, q), top_k)

    def cluster_sizes(self) -> List[int]:
        return [len(c.tree) for c in self.clusters]

    def validate(self) -> Dict[int, List[str]]:
        """Admissibility violations per cluster octree (empty lists when sound)"""
        return {i: c.tree.validate_admissibility().violations for i, c in enumerate(self.clusters)}


def _projected_bounds(points: np.ndarray) -> Aabb:
    if len(points) == 0:
        return Aabb.cube(-1.0, 1.0)
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    pad = np.maximum((hi - lo) * 0.05, 1e-6)
    return Aabb(tuple(lo - pad), tuple(hi + pad))


@performance_monitor("index.build")
def build(store: EmbeddingStore, num_clusters: int, seed: int = 0, max_iter: int = 100,
          power_iterations: int = 30, octree_config: Optional[OctreeConfig] = None) -> HybridIndex:
    """
    Cluster, fit projections and load the per-cluster octrees.

    k-means++ seeding and Lloyd iterations until assignments are stable or
    max_iter is reached. Empty clusters are dropped.

    Raises:
        InputError: fewer vectors than clusters
    """
    if isinstance(num_clusters, bool) or not isinstance(num_clusters, (int, np.integer)) or num_clusters < 1:
        raise InputError("num_clusters must be a positive integer", field_name='num_clusters',
                         field_value=num_clusters)
    if len(store) < num_clusters:
        raise InputError(f"{len(store)} vectors cannot form {num_clusters} clusters",
                         field_name='num_clusters', field_value=num_clusters)

    matrix = store.matrix()
    ids = store.ids
    kmeans = KMeans(n_clusters=num_clusters, init='k-means++', n_init=1, max_iter=max_iter, tol=0.0,
                    algorithm='lloyd', random_state=seed)
    labels = kmeans.fit_predict(matrix)

    clusters: List[ClusterPartition] = []
    assignment: Dict[int, int] = {}
    config = octree_config or OctreeConfig()
    for label in range(num_clusters):
        members = np.flatnonzero(labels == label)
        if len(members) == 0:
            logger.info(f"Dropping empty cluster {label}")
            continue
        points = matrix[members]
        mean, basis = fit_projection(points, power_iterations, seed + label)
        projected = (points - mean) @ basis
        tree = create(config, _projected_bounds(projected))
        cluster = ClusterPartition(centroid=kmeans.cluster_centers_[label].copy(), mean=mean, basis=basis,
                                   tree=tree)
        index = len(clusters)
        for row, z in zip(members.tolist(), projected.tolist()):
            point_id = ids[row]
            tree.insert(point_id, z)
            cluster.ids.append(point_id)
            assignment[point_id] = index
        clusters.append(cluster)

    logger.info(f"Built hybrid index: {len(store)} vectors, {len(clusters)} clusters, dim={store.dim}")
    return HybridIndex(store, clusters, assignment, seed)


def recall_at_k(index: HybridIndex, queries: Sequence, k: int, probe_clusters: int = 3,
                candidate_multiplier: Optional[int] = 10) -> float:
    """
    Mean fraction of the exact top-k recovered by index.query.

    Raises:
        InputError: no queries, or a non-positive probe count
    """
    if len(queries) == 0:
        raise InputError("recall_at_k needs at least one query", field_name='queries')
    total = 0.0
    for q in queries:
        exact = {point_id for point_id, _ in exact_search(index.store, q, k)}
        found = {point_id for point_id, _ in index.query(q, k, probe_clusters, candidate_multiplier)}
        total += len(exact & found) / max(len(exact), 1)
    return total / len(queries)


def make_clustered_vectors(n: int, dim: int, clusters: int, seed: int = 0, intrinsic_dim: int = 3,
                           spread: float = 1.0, noise: float = 0.01,
                           separation: float = 10.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Synthetic embeddings: each cluster is a random `intrinsic_dim`-dimensional
    Gaussian patch around a random center, plus small isotropic noise.

    Returns:
        (vectors of shape (n, dim), cluster labels of shape (n,))
    """
    if n < 1 or dim < 1 or clusters < 1:
        raise InputError("n, dim and clusters must be positive", field_name='n',
                         field_value=(n, dim, clusters))
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((clusters, dim)) * (separation / np.sqrt(dim))
    width = min(intrinsic_dim, dim)
    bases = [np.linalg.qr(rng.standard_normal((dim, width)))[0] for _ in range(clusters)]
    labels = rng.integers(0, clusters, size=n)
    latent = rng.standard_normal((n, width)) * spread
    vectors = np.empty((n, dim))
    for c in range(clusters):
        rows = labels == c
        vectors[rows] = centers[c] + latent[rows] @ bases[c].T
    vectors += rng.standard_normal((n, dim)) * noise
    return vectors, labels

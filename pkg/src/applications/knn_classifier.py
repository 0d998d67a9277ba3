"""
Incremental k-Nearest-Neighbor Classifier

Labeled 3D examples are inserted into a dynamic octree batch by batch
without rebuilding; predictions are majority votes over the k nearest
stored examples. A brute-force classifier with the same voting rule serves
as the rebuild-on-add baseline.

Vote ties are resolved by, in order: higher vote count, smaller summed
distance among the tied classes, smaller class id.
"""

import logging
import time
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.core.error_handler import DuplicateIdError, InputError, StateError
from src.core.logging_manager import performance_monitor
from src.core.validation_utils import Point3, as_point
from src.octree import Aabb, FlatPointSet, OctreeConfig, brute_knn, create, k_nearest

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabeledPoint:
    """Training or test example"""
    id: int
    pos: Point3
    label: int

    def __post_init__(self):
        if isinstance(self.id, bool) or not isinstance(self.id, (int, np.integer)) or self.id < 0:
            raise InputError("id must be a non-negative integer", field_name='id', field_value=self.id)
        if isinstance(self.label, bool) or not isinstance(self.label, (int, np.integer)) or self.label < 0:
            raise InputError("label must be a non-negative integer", field_name='label',
                             field_value=self.label)
        object.__setattr__(self, 'id', int(self.id))
        object.__setattr__(self, 'label', int(self.label))
        object.__setattr__(self, 'pos', as_point(self.pos))


def vote(neighbors: Sequence[Tuple[int, float]], labels: Dict[int, int]) -> int:
    """Majority label of (id, distance) neighbors under the tie-break chain"""
    tally: Dict[int, List[float]] = {}
    for point_id, dist in neighbors:
        entry = tally.setdefault(labels[point_id], [0, 0.0])
        entry[0] += 1
        entry[1] += dist
    return min(tally.items(), key=lambda kv: (-kv[1][0], kv[1][1], kv[0]))[0]


def _check_k(k: int) -> int:
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise InputError("k must be a positive integer", field_name='k', field_value=k)
    return int(k)


class _ClassifierBase:
    def __init__(self, k: int, num_classes: Optional[int] = None):
        self.k = _check_k(k)
        self.num_classes = num_classes
        self.labels: Dict[int, int] = {}

    def __len__(self) -> int:
        return len(self.labels)

    def _check_batch(self, batch: List[LabeledPoint]) -> None:
        seen = set()
        for point in batch:
            if point.id in self.labels or point.id in seen:
                raise DuplicateIdError(point.id)
            if self.num_classes is not None and point.label >= self.num_classes:
                raise InputError(f"label {point.label} outside the {self.num_classes} known classes",
                                 field_name='label', field_value=point.label)
            seen.add(point.id)

    def _neighbors(self, q: Point3) -> List[Tuple[int, float]]:
        raise NotImplementedError

    def classify(self, query) -> int:
        """
        Majority label among the k nearest stored examples.

        Raises:
            StateError: no examples stored
        """
        if not self.labels:
            raise StateError("cannot classify with an empty classifier")
        return vote(self._neighbors(as_point(query, "query")), self.labels)

    def classify_many(self, queries: Iterable) -> List[int]:
        return [self.classify(q) for q in queries]

    def evaluate(self, test: Sequence[LabeledPoint]) -> float:
        """
        Fraction of test examples whose predicted label matches.

        Raises:
            InputError: empty test set
        """
        if len(test) == 0:
            raise InputError("evaluate needs at least one test example", field_name='test')
        hits = sum(1 for point in test if self.classify(point.pos) == point.label)
        return hits / len(test)


class KnnClassifier(_ClassifierBase):
    """
    Octree-backed classifier; examples are added incrementally.

    Args:
        k: number of neighbors voting
        config: octree balance parameters
        bounds: initial root box (grown automatically as examples arrive)
        num_classes: if given, labels must be below it
    """

    def __init__(self, k: int = 5, config: Optional[OctreeConfig] = None,
                 bounds: Optional[Aabb] = None, num_classes: Optional[int] = None):
        super().__init__(k, num_classes)
        self.tree = create(config or OctreeConfig(), bounds or Aabb.cube(0.0, 1.0))

    def add_batch(self, batch: Iterable[LabeledPoint]) -> None:
        """
        Insert a batch of fresh examples.

        Raises:
            DuplicateIdError: an id is already stored or repeated in the batch
        """
        batch = list(batch)
        if not batch:
            return
        self._check_batch(batch)
        for point in batch:
            self.tree.insert(point.id, point.pos)
            self.labels[point.id] = point.label
        logger.debug(f"Added batch of {len(batch)} examples; classifier holds {len(self.labels)}")

    def _neighbors(self, q: Point3) -> List[Tuple[int, float]]:
        return k_nearest(self.tree, q, self.k)


class BruteForceClassifier(_ClassifierBase):
    """Linear-scan classifier that rebuilds its flat point array on every batch"""

    def __init__(self, k: int = 5, num_classes: Optional[int] = None):
        super().__init__(k, num_classes)
        self._entries: List[Tuple[int, Point3]] = []
        self._flat = FlatPointSet()

    def add_batch(self, batch: Iterable[LabeledPoint]) -> None:
        batch = list(batch)
        if not batch:
            return
        self._check_batch(batch)
        for point in batch:
            self._entries.append((point.id, point.pos))
            self.labels[point.id] = point.label
        self._flat = FlatPointSet(self._entries)

    def _neighbors(self, q: Point3) -> List[Tuple[int, float]]:
        return brute_knn(self._flat, q, self.k)


def make_blobs(n: int, classes: int = 3, seed: int = 0, spread: float = 1.0,
               separation: float = 6.0, id_offset: int = 0,
               centers: Optional[np.ndarray] = None) -> List[LabeledPoint]:
    """
    Balanced synthetic Gaussian blobs, one per class.

    Class centers are drawn from the seed unless given; labels cycle through
    the classes and are then shuffled.
    """
    if n < 1 or classes < 1:
        raise InputError("n and classes must be positive", field_name='n', field_value=(n, classes))
    rng = np.random.default_rng(seed)
    if centers is None:
        centers = rng.uniform(0.0, separation * classes, size=(classes, 3))
    labels = rng.permutation(np.arange(n) % classes)
    positions = centers[labels] + rng.normal(scale=spread, size=(n, 3))
    return [LabeledPoint(id_offset + i, tuple(p), int(c))
            for i, (p, c) in enumerate(zip(positions.tolist(), labels.tolist()))]


def blob_centers(classes: int = 3, seed: int = 0, separation: float = 6.0) -> np.ndarray:
    """The class centers make_blobs draws for the same seed"""
    return np.random.default_rng(seed).uniform(0.0, separation * classes, size=(classes, 3))


def batches(points: Sequence[LabeledPoint], batch_size: int) -> Iterable[List[LabeledPoint]]:
    if batch_size < 1:
        raise InputError("batch_size must be positive", field_name='batch_size', field_value=batch_size)
    for start in range(0, len(points), batch_size):
        yield list(points[start:start + batch_size])


@dataclass
class KnnBatchRecord:
    """One row of an incremental training run"""
    batch_index: int
    size: int
    update_ms: float
    query_ms: float
    accuracy: float


@performance_monitor("knn.incremental")
def run_incremental(train: Sequence[LabeledPoint], test: Sequence[LabeledPoint], k: int = 5,
                    batch_size: int = 500, config: Optional[OctreeConfig] = None) -> List[KnnBatchRecord]:
    """Add `train` batch by batch, timing each update and re-scoring `test` after it"""
    classifier = KnnClassifier(k=k, config=config)
    records = []
    for index, batch in enumerate(batches(train, batch_size)):
        start = time.perf_counter()
        classifier.add_batch(batch)
        update_ms = (time.perf_counter() - start) * 1000.0

        start = time.perf_counter()
        accuracy = classifier.evaluate(test)
        query_ms = (time.perf_counter() - start) * 1000.0

        records.append(KnnBatchRecord(index, len(classifier), update_ms, query_ms, accuracy))
    return records


@dataclass
class BatchSweepRecord:
    """Total cost of adding the same examples with one batch size"""
    batch_size: int
    batches: int
    total_update_s: float
    per_point_update_s: float


def batch_size_sweep(base: Sequence[LabeledPoint], new: Sequence[LabeledPoint],
                     batch_sizes: Sequence[int], k: int = 5,
                     config: Optional[OctreeConfig] = None) -> List[BatchSweepRecord]:
    """For each batch size, load `base` then time adding `new` in batches of that size"""
    if not new:
        raise InputError("batch_size_sweep needs new examples", field_name='new')
    records = []
    for size in batch_sizes:
        classifier = KnnClassifier(k=k, config=config)
        classifier.add_batch(base)
        count = 0
        start = time.perf_counter()
        for batch in batches(new, size):
            classifier.add_batch(batch)
            count += 1
        total = time.perf_counter() - start
        records.append(BatchSweepRecord(size, count, total, total / len(new)))
    return records

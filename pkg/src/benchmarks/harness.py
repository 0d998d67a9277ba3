"""
Benchmark Harness

Times each structure on every step of a series:

- build_s: constructing the structure from scratch on the step's cloud
- update_s: bringing an incrementally maintained copy from the previous
  step to this one (moves, removals, insertions); the flat baseline
  rebuilds instead
- nb_s: neighbor-list construction at the cutoff on the maintained copy

Resident memory is sampled with psutil around every phase; when the
platform does not expose it the memory columns stay empty.
"""

import logging
import time
from dataclasses import asdict, dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence

import psutil

from src.core.error_handler import InputError
from src.core.logging_manager import performance_monitor
from src.octree import (
    FlatPointSet,
    NeighborList,
    Octree,
    OctreeConfig,
    brute_pairs,
    build_neighbor_lists,
    create,
    cutoff_for_mean_degree,
)
from .generators import DOMAIN, PointCloud, TimeStepSeries

logger = logging.getLogger(__name__)

BENCH_COLUMNS = ['structure', 'distribution', 'step', 'build_s', 'update_s', 'nb_s',
                 'peak_mem_mb', 'avg_mem_mb']


@dataclass
class BenchRecord:
    """Timings and memory for one structure on one step"""
    structure: str
    distribution: str
    step: int
    build_s: float
    update_s: float
    nb_s: float
    peak_mem_mb: Optional[float] = None
    avg_mem_mb: Optional[float] = None

    def to_row(self) -> Dict[str, Any]:
        return asdict(self)


class MemorySampler:
    """Resident set size of this process in MB, or None where unavailable"""

    def __init__(self):
        try:
            self._process = psutil.Process()
            self._process.memory_info()
        except (psutil.Error, NotImplementedError, AttributeError, OSError):
            logger.info("Resident memory not available; memory columns left empty")
            self._process = None
        self.samples: List[float] = []

    @property
    def available(self) -> bool:
        return self._process is not None

    def sample(self) -> None:
        if self._process is not None:
            self.samples.append(self._process.memory_info().rss / (1024 * 1024))

    def reset(self) -> None:
        self.samples = []

    def peak(self) -> Optional[float]:
        return max(self.samples) if self.samples else None

    def average(self) -> Optional[float]:
        return sum(self.samples) / len(self.samples) if self.samples else None


class BenchStructure:
    """A point structure the harness can build, update and query"""

    name = "structure"

    def build(self, cloud: PointCloud) -> None:
        raise NotImplementedError

    def fresh(self) -> "BenchStructure":
        """An empty structure with the same configuration"""
        raise NotImplementedError

    def update(self, previous: Optional[PointCloud], current: PointCloud) -> None:
        raise NotImplementedError

    def neighbor_lists(self, cutoff: float) -> NeighborList:
        raise NotImplementedError

    def __len__(self) -> int:
        raise NotImplementedError


class OctreeStructure(BenchStructure):
    """Dynamic octree updated in place"""

    def __init__(self, config: OctreeConfig):
        self.config = config
        self.name = f"octree(K={config.K},alpha={config.alpha:g})"
        self.tree: Octree = create(config, DOMAIN)

    def build(self, cloud: PointCloud) -> None:
        self.tree = create(self.config, DOMAIN)
        self.tree.bulk_load(cloud.entries())

    def fresh(self) -> "OctreeStructure":
        return OctreeStructure(self.config)

    def update(self, previous: Optional[PointCloud], current: PointCloud) -> None:
        apply_step(self.tree, previous, current)

    def neighbor_lists(self, cutoff: float) -> NeighborList:
        return build_neighbor_lists(self.tree, cutoff)

    def __len__(self) -> int:
        return len(self.tree)


class FlatStructure(BenchStructure):
    """Brute-force baseline; every update is a rebuild"""

    name = "flat"

    def __init__(self):
        self.points = FlatPointSet()

    def build(self, cloud: PointCloud) -> None:
        self.points = FlatPointSet.from_arrays(cloud.ids, cloud.positions)

    def fresh(self) -> "FlatStructure":
        return FlatStructure()

    def update(self, previous: Optional[PointCloud], current: PointCloud) -> None:
        self.build(current)

    def neighbor_lists(self, cutoff: float) -> NeighborList:
        return brute_pairs(self.points, cutoff)

    def __len__(self) -> int:
        return len(self.points)


def apply_step(tree: Octree, previous: Optional[PointCloud], current: PointCloud) -> None:
    """
    Turn the tree's contents for `previous` into `current`: ids only in
    `previous` are removed, shared ids are moved, new ids are inserted.
    """
    before = 0 if previous is None else len(previous)
    after = len(current)
    for point_id in range(after, before):
        tree.remove(point_id)
    for point_id, pos in current.entries():
        if point_id < before:
            tree.update_position(point_id, pos)
        else:
            tree.insert(point_id, pos)


def make_structures(Ks: Iterable[int], alpha: float = 2.0, include_flat: bool = False,
                    max_depth: int = 32) -> List[BenchStructure]:
    structures: List[BenchStructure] = [OctreeStructure(OctreeConfig(K=k, alpha=alpha, max_depth=max_depth))
                                        for k in Ks]
    if include_flat:
        structures.append(FlatStructure())
    return structures


def auto_cutoff(series: TimeStepSeries, target_degree: float = 20.0, seed: int = 0) -> float:
    """Cutoff giving roughly `target_degree` neighbors per point on the largest step"""
    largest = max(series.steps, key=len)
    return cutoff_for_mean_degree(largest.positions, target_degree, seed=seed)


def _timed(fn, *args) -> float:
    start = time.perf_counter()
    fn(*args)
    return time.perf_counter() - start


@performance_monitor("bench.run")
def run_bench(series: TimeStepSeries, structures: Sequence[BenchStructure],
              cutoff: Optional[float] = None) -> List[BenchRecord]:
    """
    Benchmark each structure over the whole series, one structure at a time.

    Raises:
        InputError: empty series, no structures or a non-positive cutoff
    """
    if len(series) == 0:
        raise InputError("cannot benchmark an empty series", field_name='series')
    if not structures:
        raise InputError("at least one structure is required", field_name='structures')
    if cutoff is None:
        cutoff = auto_cutoff(series, seed=series.seed)
        logger.info(f"Chosen cutoff {cutoff:.6g} for mean degree ~20")
    if not cutoff > 0:
        raise InputError("cutoff must be positive", field_name='cutoff', field_value=cutoff)

    memory = MemorySampler()
    records: List[BenchRecord] = []
    for structure in structures:
        maintained = structure.fresh()
        previous: Optional[PointCloud] = None
        for t, cloud in enumerate(series.steps):
            memory.reset()
            memory.sample()

            scratch = structure.fresh()
            build_s = _timed(scratch.build, cloud)
            memory.sample()
            del scratch

            update_s = _timed(maintained.update, previous, cloud)
            memory.sample()

            nb_s = _timed(maintained.neighbor_lists, cutoff)
            memory.sample()

            records.append(BenchRecord(structure.name, series.distribution, t, build_s, update_s, nb_s,
                                       memory.peak(), memory.average()))
            logger.debug(f"{structure.name} step {t}: n={len(cloud)} build={build_s:.4f}s "
                         f"update={update_s:.4f}s nb={nb_s:.4f}s")
            previous = cloud
    return records

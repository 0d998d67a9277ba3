"""
Benchmarks Module

Seeded point-cloud series and the timing/memory harness that compares
octree configurations against the flat brute-force baseline.
"""

from .generators import (
    DOMAIN,
    DISTRIBUTIONS,
    PointCloud,
    TimeStepSeries,
    exponential_counts,
    gen_varying_density,
    gen_stepwise,
    gen_exponential,
    gen_multimodal,
    gen_wave,
    generate
)

from .harness import (
    BENCH_COLUMNS,
    BenchRecord,
    BenchStructure,
    OctreeStructure,
    FlatStructure,
    MemorySampler,
    apply_step,
    auto_cutoff,
    make_structures,
    run_bench
)

__all__ = [
    'DOMAIN',
    'DISTRIBUTIONS',
    'PointCloud',
    'TimeStepSeries',
    'exponential_counts',
    'gen_varying_density',
    'gen_stepwise',
    'gen_exponential',
    'gen_multimodal',
    'gen_wave',
    'generate',
    'BENCH_COLUMNS',
    'BenchRecord',
    'BenchStructure',
    'OctreeStructure',
    'FlatStructure',
    'MemorySampler',
    'apply_step',
    'auto_cutoff',
    'make_structures',
    'run_bench'
]

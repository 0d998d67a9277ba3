"""
Benchmark Point-Cloud Generators

Seeded time-step series over the domain [0, 100]^3:

- varying: cycles high density (10,000), low density (100), density spike
  (20,000) and a variable-density region (100 to 15,000 points)
- stepwise: alternates 50,000 and 10 points
- exponential: geometric growth from 10 to 50,000 points over 20 steps,
  then the mirror-image decay
- multimodal: three Gaussian peaks (45,100 points with background)
  alternating with sparse 100-point steps
- wave: fixed point count with density along x proportional to
  1 + sin(2 pi f x / 100 + phase), the phase drifting every step

Counts are multiplied by `scale` (at least one point per component).
Step t holds ids 0 .. n_t - 1. When two consecutive steps place points in
the same region, the shared ids keep their previous positions plus a
Gaussian jitter of 1% of the domain edge; otherwise they are redrawn.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from src.core.error_handler import InputError
from src.octree.geometry import Aabb

logger = logging.getLogger(__name__)

DOMAIN = Aabb.cube(0.0, 100.0)
DOMAIN_EDGE = 100.0
JITTER_SIGMA = 0.01 * DOMAIN_EDGE

Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass
class PointCloud:
    """One time step: ids 0..n-1 and their positions"""
    positions: np.ndarray

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self.positions))

    def __len__(self) -> int:
        return len(self.positions)

    def entries(self) -> Iterator[Tuple[int, Tuple[float, float, float]]]:
        for point_id, p in enumerate(self.positions.tolist()):
            yield point_id, (p[0], p[1], p[2])


@dataclass
class TimeStepSeries:
    """A generated sequence of point clouds and the parameters that produced it"""
    distribution: str
    seed: int
    params: Dict[str, Any] = field(default_factory=dict)
    steps: List[PointCloud] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def counts(self) -> List[int]:
        return [len(step) for step in self.steps]

    @property
    def descriptor(self) -> Dict[str, Any]:
        return {'distribution': self.distribution, 'seed': self.seed, **self.params}


def _check_scale(scale: float) -> float:
    if isinstance(scale, bool) or not isinstance(scale, (int, float)) or not (0.0 < scale <= 1.0):
        raise InputError("scale must lie in (0, 1]", field_name='scale', field_value=scale)
    return float(scale)


def _check_steps(steps: int) -> int:
    if isinstance(steps, bool) or not isinstance(steps, int) or steps < 1:
        raise InputError("steps must be a positive integer", field_name='steps', field_value=steps)
    return steps


def scaled(count: float, scale: float) -> int:
    return max(1, int(round(count * scale)))


def _uniform_box(lo: float, hi: float) -> Sampler:
    def sample(rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(lo, hi, size=(n, 3))
    return sample


def _clipped_gaussian(center, sigma: float) -> Sampler:
    center = np.asarray(center, dtype=np.float64)

    def sample(rng: np.random.Generator, n: int) -> np.ndarray:
        return np.clip(rng.normal(center, sigma, size=(n, 3)), 0.0, DOMAIN_EDGE)
    return sample


def _evolve(rng: np.random.Generator, previous: Optional[PointCloud], n: int, sampler: Sampler,
            same_region: bool) -> PointCloud:
    """Next cloud of n points; shared ids jitter when the region is unchanged"""
    if previous is None or not same_region:
        return PointCloud(sampler(rng, n))
    keep = min(n, len(previous))
    kept = previous.positions[:keep] + rng.normal(0.0, JITTER_SIGMA, size=(keep, 3))
    kept = np.clip(kept, 0.0, DOMAIN_EDGE)
    if n > keep:
        kept = np.vstack([kept, sampler(rng, n - keep)])
    return PointCloud(kept)


# ----------------------------------------------------------------------
# distributions

VARYING_REGIMES = ('high', 'low', 'spike', 'variable')


def gen_varying_density(seed: int = 0, scale: float = 1.0, steps: int = 10) -> TimeStepSeries:
    """Cycle through the four density regimes, one regime per step"""
    scale = _check_scale(scale)
    steps = _check_steps(steps)
    rng = np.random.default_rng(seed)
    series = TimeStepSeries('varying', seed, {'scale': scale, 'steps': steps})
    previous = None
    for t in range(steps):
        regime = VARYING_REGIMES[t % len(VARYING_REGIMES)]
        if regime == 'high':
            n, sampler = scaled(10000, scale), _uniform_box(25.0, 75.0)
        elif regime == 'low':
            n, sampler = scaled(100, scale), _uniform_box(0.0, DOMAIN_EDGE)
        elif regime == 'spike':
            n, sampler = scaled(20000, scale), _uniform_box(45.0, 55.0)
        else:
            n = scaled(int(rng.integers(100, 15001)), scale)
            center = rng.uniform(20.0, 80.0)
            half = rng.uniform(5.0, 20.0)
            sampler = _uniform_box(center - half, center + half)
        previous = _evolve(rng, previous, n, sampler, same_region=False)
        series.steps.append(previous)
    return series


def gen_stepwise(seed: int = 0, scale: float = 1.0, steps: int = 10) -> TimeStepSeries:
    """Alternate 50,000 and 10 uniformly placed points"""
    scale = _check_scale(scale)
    steps = _check_steps(steps)
    rng = np.random.default_rng(seed)
    series = TimeStepSeries('stepwise', seed, {'scale': scale, 'steps': steps})
    sampler = _uniform_box(0.0, DOMAIN_EDGE)
    previous = None
    for t in range(steps):
        n = scaled(50000 if t % 2 == 0 else 10, scale)
        previous = _evolve(rng, previous, n, sampler, same_region=True)
        series.steps.append(previous)
    return series


def exponential_counts(scale: float = 1.0, half_steps: int = 20, low: int = 10,
                       high: int = 50000) -> List[int]:
    """Geometric progression low -> high over half_steps, then its mirror image"""
    up = [low * (high / low) ** (t / (half_steps - 1)) for t in range(half_steps)]
    return [scaled(c, scale) for c in up + up[::-1]]


def gen_exponential(seed: int = 0, scale: float = 1.0) -> TimeStepSeries:
    """Exponential growth then decay around a central Gaussian blob"""
    scale = _check_scale(scale)
    rng = np.random.default_rng(seed)
    counts = exponential_counts(scale)
    series = TimeStepSeries('exponential', seed, {'scale': scale, 'steps': len(counts)})
    sampler = _clipped_gaussian((50.0, 50.0, 50.0), 15.0)
    previous = None
    for n in counts:
        previous = _evolve(rng, previous, n, sampler, same_region=True)
        series.steps.append(previous)
    return series


MULTIMODAL_CENTERS = ((20.0, 20.0, 20.0), (50.0, 80.0, 50.0), (80.0, 30.0, 70.0))
MULTIMODAL_PEAK = 15000
MULTIMODAL_SIGMA = 4.0
SPARSE_POINTS = 100


def gen_multimodal(seed: int = 0, scale: float = 1.0, steps: int = 10) -> TimeStepSeries:
    """Peak steps (three Gaussian clusters plus sparse background) alternating with sparse steps"""
    scale = _check_scale(scale)
    steps = _check_steps(steps)
    rng = np.random.default_rng(seed)
    series = TimeStepSeries('multimodal', seed, {'scale': scale, 'steps': steps})
    background = _uniform_box(0.0, DOMAIN_EDGE)
    for t in range(steps):
        if t % 2 == 0:
            parts = [_clipped_gaussian(c, MULTIMODAL_SIGMA)(rng, scaled(MULTIMODAL_PEAK, scale))
                     for c in MULTIMODAL_CENTERS]
            parts.append(background(rng, scaled(SPARSE_POINTS, scale)))
            cloud = PointCloud(np.vstack(parts))
        else:
            cloud = PointCloud(background(rng, scaled(SPARSE_POINTS, scale)))
        series.steps.append(cloud)
    return series


def wave_cdf(x: np.ndarray, frequency: float, phase: float) -> np.ndarray:
    """Unnormalized integral of 1 + sin(2 pi f u / L + phase) from 0 to x"""
    w = 2.0 * math.pi * frequency / DOMAIN_EDGE
    return x - (np.cos(w * x + phase) - math.cos(phase)) / w


def gen_wave(seed: int = 0, n: int = 10000, frequency: float = 3.0, steps: int = 10,
             drift: float = 0.1) -> TimeStepSeries:
    """
    Fixed-count clouds with sinusoidal density along x.

    x is drawn by inverse-CDF sampling on a fine grid; y and z are uniform.
    The phase advances by 2 pi * drift per step.
    """
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InputError("n must be a positive integer", field_name='n', field_value=n)
    if not (isinstance(frequency, (int, float)) and frequency > 0 and math.isfinite(frequency)):
        raise InputError("frequency must be positive", field_name='frequency', field_value=frequency)
    steps = _check_steps(steps)
    rng = np.random.default_rng(seed)
    series = TimeStepSeries('wave', seed, {'n': n, 'frequency': float(frequency), 'steps': steps,
                                           'drift': drift})
    grid = np.linspace(0.0, DOMAIN_EDGE, 4097)
    for t in range(steps):
        phase = 2.0 * math.pi * drift * t
        cdf = wave_cdf(grid, frequency, phase)
        x = np.interp(rng.uniform(0.0, cdf[-1], size=n), cdf, grid)
        yz = rng.uniform(0.0, DOMAIN_EDGE, size=(n, 2))
        series.steps.append(PointCloud(np.column_stack([x, yz])))
    return series


DISTRIBUTIONS = ('varying', 'stepwise', 'exponential', 'multimodal', 'wave')


def generate(distribution: str, seed: int = 0, scale: float = 1.0, steps: int = 10,
             wave_points: int = 10000, wave_frequency: float = 3.0) -> TimeStepSeries:
    """
    Dispatch by name.

    The wave series ignores `scale`; its size is `wave_points`. The
    exponential series always has 40 steps.
    """
    if distribution == 'varying':
        series = gen_varying_density(seed, scale, steps)
    elif distribution == 'stepwise':
        series = gen_stepwise(seed, scale, steps)
    elif distribution == 'exponential':
        series = gen_exponential(seed, scale)
    elif distribution == 'multimodal':
        series = gen_multimodal(seed, scale, steps)
    elif distribution == 'wave':
        series = gen_wave(seed, wave_points, wave_frequency, steps)
    else:
        raise InputError(f"Unknown distribution: {distribution}", field_name='distribution',
                         field_value=distribution)
    logger.debug(f"Generated {distribution} series: counts={series.counts()}")
    return series

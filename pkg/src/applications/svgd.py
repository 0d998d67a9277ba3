"""
Stein Variational Gradient Descent

Particle inference with an RBF kernel k(x, y) = exp(-|x - y|^2 / h).
Two update modes are provided:

- naive: every particle interacts with every particle (self included),
  normalized by n
- octree: each particle interacts only with neighbors within
  r = sqrt(4h) found through octree neighbor lists, normalized by the
  neighbor count; `compat_norm` switches to the naive normalization
  (divide by n, add the self term) so both modes can be compared exactly

All particles are updated simultaneously from the same snapshot.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import pdist
from scipy.special import logsumexp

from src.core.error_handler import ConsistencyError, DegenerateInputError, InputError
from src.core.logging_manager import performance_monitor
from src.core.validation_utils import as_point, as_point_array, require_positive
from src.octree import Aabb, Octree, OctreeConfig, build_neighbor_lists, create

logger = logging.getLogger(__name__)


class SvgdMode(Enum):
    """Interaction scheme for the particle update"""
    NAIVE = "naive"
    OCTREE = "octree"


# ----------------------------------------------------------------------
# target distributions

class TargetDistribution:
    """Log density and its gradient over 3D points"""

    name = "target"

    def log_density_batch(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_log_density_batch(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_density(self, x) -> float:
        return float(self.log_density_batch(np.asarray([as_point(x)]))[0])

    def grad_log_density(self, x) -> np.ndarray:
        return self.grad_log_density_batch(np.asarray([as_point(x)]))[0]


class GaussianMixture(TargetDistribution):
    """
    Weighted mixture of full-covariance Gaussians in 3D.

    Args:
        means: (c, 3) component means
        weights: c positive weights, normalized internally
        covariances: (c, 3, 3) symmetric positive definite matrices;
            defaults to identities
    """

    def __init__(self, means: Sequence[Sequence[float]], weights: Optional[Sequence[float]] = None,
                 covariances: Optional[Sequence] = None, name: str = "mixture"):
        self.name = name
        self.means = as_point_array(means, "means")
        c = len(self.means)
        if c == 0:
            raise InputError("a mixture needs at least one component", field_name='means')

        w = np.full(c, 1.0 / c) if weights is None else np.asarray(weights, dtype=np.float64)
        if w.shape != (c,) or not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InputError("weights must be one positive value per component", field_name='weights',
                             field_value=weights)
        self.weights = w / w.sum()

        if covariances is None:
            cov = np.tile(np.eye(3), (c, 1, 1))
        else:
            cov = np.asarray(covariances, dtype=np.float64)
        if cov.shape != (c, 3, 3):
            raise InputError("covariances must have shape (c, 3, 3)", field_name='covariances',
                             field_value=cov.shape)
        sign, logdet = np.linalg.slogdet(cov)
        if np.any(sign <= 0):
            raise InputError("covariances must be positive definite", field_name='covariances')
        self.covariances = cov
        self.precisions = np.linalg.inv(cov)
        self._log_norm = np.log(self.weights) - 0.5 * (3 * math.log(2 * math.pi) + logdet)

    def _component_terms(self, points: np.ndarray):
        diff = points[:, None, :] - self.means[None, :, :]
        solved = np.einsum('cij,ncj->nci', self.precisions, diff)
        maha = np.einsum('nci,nci->nc', diff, solved)
        return self._log_norm[None, :] - 0.5 * maha, solved

    def log_density_batch(self, points: np.ndarray) -> np.ndarray:
        log_comp, _ = self._component_terms(np.asarray(points, dtype=np.float64))
        return logsumexp(log_comp, axis=1)

    def grad_log_density_batch(self, points: np.ndarray) -> np.ndarray:
        log_comp, solved = self._component_terms(np.asarray(points, dtype=np.float64))
        resp = np.exp(log_comp - logsumexp(log_comp, axis=1, keepdims=True))
        return -np.einsum('nc,nci->ni', resp, solved)


def gaussian(mean: Sequence[float] = (0.0, 0.0, 0.0), variance: float = 1.0) -> GaussianMixture:
    """Isotropic Gaussian as a one-component mixture"""
    require_positive(variance, "variance")
    return GaussianMixture([mean], [1.0], [np.eye(3) * variance], name="gauss")


TARGET_PRESETS = {
    'gauss': lambda: gaussian(),
    'mixture2': lambda: GaussianMixture([(-2.0, 0.0, 0.0), (2.0, 0.0, 0.0)], [0.5, 0.5],
                                        name="mixture2"),
}


def get_target(name: str) -> TargetDistribution:
    """Look up a named preset ('gauss' or 'mixture2')"""
    try:
        return TARGET_PRESETS[name]()
    except KeyError:
        raise InputError(f"Unknown target preset: {name}", field_name='target', field_value=name)


def check_gradient(target: TargetDistribution, probes: int = 20, seed: int = 0,
                   eps: float = 1e-5, scale: float = 2.0) -> float:
    """
    Largest relative error between grad_log_density and central finite
    differences of log_density over seeded probe points.
    """
    rng = np.random.default_rng(seed)
    points = rng.normal(scale=scale, size=(probes, 3))
    analytic = target.grad_log_density_batch(points)
    worst = 0.0
    for p, g in zip(points, analytic):
        fd = np.empty(3)
        for a in range(3):
            step = np.zeros(3)
            step[a] = eps
            fd[a] = (target.log_density(p + step) - target.log_density(p - step)) / (2 * eps)
        denom = max(float(np.linalg.norm(g)), 1e-8)
        worst = max(worst, float(np.linalg.norm(fd - g)) / denom)
    return worst


# ----------------------------------------------------------------------
# kernel

def rbf_kernel(x, y, h: float) -> float:
    """exp(-|x - y|^2 / h)"""
    require_positive(h, "h")
    a = as_point(x, "x")
    b = as_point(y, "y")
    d0 = a[0] - b[0]
    d1 = a[1] - b[1]
    d2 = a[2] - b[2]
    return math.exp(-(d0 * d0 + d1 * d1 + d2 * d2) / h)


def rbf_kernel_grad(x, y, h: float) -> np.ndarray:
    """Gradient of rbf_kernel with respect to its first argument: -(2/h)(x - y) k(x, y)"""
    k = rbf_kernel(x, y, h)
    return -(2.0 / h) * (np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)) * k


def truncation_radius(h: float) -> float:
    """Distance at which the kernel has decayed to exp(-4)"""
    require_positive(h, "h")
    return math.sqrt(4.0 * h)


def median_bandwidth(positions) -> float:
    """
    median(pairwise squared distances) / log(n + 1).

    Raises:
        InputError: fewer than two particles
        DegenerateInputError: all particles coincide
    """
    pts = as_point_array(positions, "positions")
    n = len(pts)
    if n < 2:
        raise InputError("median bandwidth needs at least two particles", field_name='positions',
                         field_value=n)
    med = float(np.median(pdist(pts, metric='sqeuclidean')))
    if med <= 0.0:
        raise DegenerateInputError("median pairwise distance is zero; bandwidth undefined")
    return med / math.log(n + 1)


def parse_bandwidth(value: Union[str, float]) -> Optional[float]:
    """'median' -> None (choose per run); otherwise a positive float"""
    if isinstance(value, str) and value.strip().lower() == "median":
        return None
    try:
        h = float(value)
    except (TypeError, ValueError):
        raise InputError("bandwidth must be 'median' or a positive number", field_name='bandwidth',
                         field_value=value)
    require_positive(h, "bandwidth")
    return h


# ----------------------------------------------------------------------
# ensemble and steps

@dataclass
class StepStats:
    """Work done by the step that produced an ensemble"""
    pair_evaluations: int = 0
    mean_neighbors: Optional[float] = None
    isolated_particles: int = 0


@dataclass
class ParticleEnsemble:
    """Particle positions (particle i has id i) with step size and kernel bandwidth"""
    positions: np.ndarray
    step_size: float
    bandwidth: float
    stats: StepStats = field(default_factory=StepStats)

    def __post_init__(self):
        self.positions = np.array(as_point_array(self.positions, "positions"))
        if len(self.positions) < 1:
            raise InputError("an ensemble needs at least one particle", field_name='positions')
        require_positive(self.step_size, "step_size")
        require_positive(self.bandwidth, "bandwidth")

    @property
    def n(self) -> int:
        return len(self.positions)

    def moved(self, phi: np.ndarray, stats: StepStats) -> "ParticleEnsemble":
        return ParticleEnsemble(self.positions + self.step_size * phi, self.step_size,
                                self.bandwidth, stats)


def _accumulate(xi, others, x, grads, h: float):
    """Sum of k(x_j, x_i) grad_j + grad_{x_j} k(x_j, x_i) over j in others"""
    xi0, xi1, xi2 = xi
    two_over_h = 2.0 / h
    s0 = s1 = s2 = 0.0
    for j in others:
        xj = x[j]
        gj = grads[j]
        d0 = xi0 - xj[0]
        d1 = xi1 - xj[1]
        d2 = xi2 - xj[2]
        k = math.exp(-(d0 * d0 + d1 * d1 + d2 * d2) / h)
        c = two_over_h * k
        s0 += k * gj[0] + c * d0
        s1 += k * gj[1] + c * d1
        s2 += k * gj[2] + c * d2
    return s0, s1, s2


def svgd_step_naive(ensemble: ParticleEnsemble, target: TargetDistribution) -> ParticleEnsemble:
    """One full O(n^2) update: phi_i = (1/n) sum_j [k(x_j, x_i) grad log p(x_j) + grad_{x_j} k(x_j, x_i)]"""
    n = ensemble.n
    h = ensemble.bandwidth
    x = ensemble.positions.tolist()
    grads = target.grad_log_density_batch(ensemble.positions).tolist()
    everyone = range(n)

    phi = np.empty((n, 3))
    for i in range(n):
        s0, s1, s2 = _accumulate(x[i], everyone, x, grads, h)
        phi[i] = (s0 / n, s1 / n, s2 / n)

    return ensemble.moved(phi, StepStats(pair_evaluations=n * n, mean_neighbors=float(n)))


def _check_octree_matches(ensemble: ParticleEnsemble, octree: Octree) -> None:
    n = ensemble.n
    if len(octree) != n:
        raise ConsistencyError(f"octree holds {len(octree)} points but the ensemble has {n} particles",
                               details={'octree_size': len(octree), 'particles': n})
    for i, p in enumerate(ensemble.positions.tolist()):
        if i not in octree or octree.position(i) != tuple(p):
            raise ConsistencyError(f"octree position of particle {i} does not match the ensemble",
                                   details={'particle': i})


def svgd_step_octree(ensemble: ParticleEnsemble, target: TargetDistribution, octree: Octree,
                     compat_norm: bool = False) -> ParticleEnsemble:
    """
    One truncated update over neighbor lists at r = sqrt(4h).

    The octree must hold particle i under id i at its current position; it
    is moved to the new positions before returning.

    Raises:
        ConsistencyError: octree contents differ from the ensemble
    """
    _check_octree_matches(ensemble, octree)
    n = ensemble.n
    h = ensemble.bandwidth
    neighbors = build_neighbor_lists(octree, truncation_radius(h))
    x = ensemble.positions.tolist()
    grads = target.grad_log_density_batch(ensemble.positions).tolist()

    phi = np.zeros((n, 3))
    evaluations = 0
    isolated = 0
    for i in range(n):
        nbrs = neighbors.lists[i]
        s0, s1, s2 = _accumulate(x[i], nbrs, x, grads, h)
        evaluations += len(nbrs)
        if compat_norm:
            # self term: k = 1, kernel gradient 0
            g = grads[i]
            phi[i] = ((g[0] + s0) / n, (g[1] + s1) / n, (g[2] + s2) / n)
            evaluations += 1
        elif nbrs:
            m = len(nbrs)
            phi[i] = (s0 / m, s1 / m, s2 / m)
        else:
            isolated += 1

    updated = ensemble.moved(phi, StepStats(pair_evaluations=evaluations,
                                            mean_neighbors=neighbors.mean_degree(),
                                            isolated_particles=isolated))
    for i, p in enumerate(updated.positions.tolist()):
        octree.update_position(i, p)
    return updated


def build_particle_octree(positions: np.ndarray, config: Optional[OctreeConfig] = None) -> Octree:
    """Octree holding particle i under id i, with a root box padded around the cloud"""
    pts = as_point_array(positions, "positions")
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    pad = np.maximum((hi - lo) * 0.05, 1e-6)
    tree = create(config or OctreeConfig(), Aabb(tuple(lo - pad), tuple(hi + pad)))
    tree.bulk_load(enumerate(pts.tolist()))
    return tree


# ----------------------------------------------------------------------
# runs

@dataclass
class SvgdTrajectory:
    """
    Per-iteration record of one run. Row 0 describes the seeded initial
    state; positions are kept every `record_every` iterations and always
    for the final iteration.
    """
    mode: SvgdMode
    target: str
    n: int
    seed: int
    step_size: float
    bandwidth: float
    compat_norm: bool
    iterations: List[int] = field(default_factory=list)
    wall_ms: List[float] = field(default_factory=list)
    mean_logp: List[float] = field(default_factory=list)
    pair_evaluations: List[int] = field(default_factory=list)
    mean_neighbors: List[Optional[float]] = field(default_factory=list)
    recorded: Dict[int, np.ndarray] = field(default_factory=dict)
    final: Optional[ParticleEnsemble] = None

    def rows(self):
        """(iter, wall_ms, mean_logp) rows"""
        return list(zip(self.iterations, self.wall_ms, self.mean_logp))


@performance_monitor("svgd.run")
def run_svgd(target: Union[str, TargetDistribution], n: int, iterations: int,
             mode: Union[str, SvgdMode] = SvgdMode.OCTREE, seed: int = 0, step_size: float = 0.05,
             bandwidth: Union[str, float] = "median", compat_norm: bool = False,
             rebuild_every: int = 0, record_every: int = 1,
             octree_config: Optional[OctreeConfig] = None,
             initial_positions: Optional[np.ndarray] = None) -> SvgdTrajectory:
    """
    Run SVGD from standard normal initial particles drawn with `seed`.

    The bandwidth is fixed for the whole run; 'median' applies the median
    heuristic to the initial particles. In octree mode the tree is
    maintained with update_position, or rebuilt from scratch every
    `rebuild_every` iterations when that is positive.
    """
    if isinstance(target, str):
        target = get_target(target)
    try:
        mode = SvgdMode(mode)
    except ValueError:
        raise InputError(f"Unknown SVGD mode: {mode}", field_name='mode', field_value=mode)
    if isinstance(n, bool) or not isinstance(n, int) or n < 2:
        raise InputError("n must be an integer >= 2", field_name='n', field_value=n)
    if isinstance(iterations, bool) or not isinstance(iterations, int) or iterations < 0:
        raise InputError("iterations must be a non-negative integer", field_name='iterations',
                         field_value=iterations)
    if record_every < 1:
        raise InputError("record_every must be at least 1", field_name='record_every',
                         field_value=record_every)
    if rebuild_every < 0:
        raise InputError("rebuild_every must be non-negative", field_name='rebuild_every',
                         field_value=rebuild_every)

    if initial_positions is None:
        rng = np.random.default_rng(seed)
        initial_positions = rng.standard_normal((n, 3))
    positions = as_point_array(initial_positions, "initial_positions")
    if len(positions) != n:
        raise InputError("initial_positions must hold n particles", field_name='initial_positions',
                         field_value=len(positions))

    h = parse_bandwidth(bandwidth)
    if h is None:
        h = median_bandwidth(positions)
    ensemble = ParticleEnsemble(positions, step_size, h)

    trajectory = SvgdTrajectory(mode=mode, target=target.name, n=n, seed=seed, step_size=step_size,
                                bandwidth=h, compat_norm=compat_norm)
    trajectory.iterations.append(0)
    trajectory.wall_ms.append(0.0)
    trajectory.mean_logp.append(float(np.mean(target.log_density_batch(ensemble.positions))))
    trajectory.pair_evaluations.append(0)
    trajectory.mean_neighbors.append(None)
    trajectory.recorded[0] = ensemble.positions.copy()

    logger.info(f"SVGD run: mode={mode.value} target={target.name} n={n} iterations={iterations} "
                f"h={h:.6g} r={truncation_radius(h):.6g}")

    octree = build_particle_octree(ensemble.positions, octree_config) if mode is SvgdMode.OCTREE else None
    for it in range(1, iterations + 1):
        start = time.perf_counter()
        if mode is SvgdMode.NAIVE:
            ensemble = svgd_step_naive(ensemble, target)
        else:
            if rebuild_every and (it - 1) % rebuild_every == 0 and it > 1:
                octree = build_particle_octree(ensemble.positions, octree_config)
            ensemble = svgd_step_octree(ensemble, target, octree, compat_norm=compat_norm)
        elapsed_ms = (time.perf_counter() - start) * 1000.0

        trajectory.iterations.append(it)
        trajectory.wall_ms.append(elapsed_ms)
        trajectory.mean_logp.append(float(np.mean(target.log_density_batch(ensemble.positions))))
        trajectory.pair_evaluations.append(ensemble.stats.pair_evaluations)
        trajectory.mean_neighbors.append(ensemble.stats.mean_neighbors)
        if it % record_every == 0 or it == iterations:
            trajectory.recorded[it] = ensemble.positions.copy()

    trajectory.final = ensemble
    return trajectory

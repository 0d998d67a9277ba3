"""
Command-line dispatcher.

One entry point, one subcommand per module:

    bench      benchmark octree configurations (and the flat baseline) on a generated series
    svgd       particle inference, naive or octree-truncated
    knn        incremental kNN classification
    index      hybrid vector index search and recall
    metrics    neighborhood distortion, Jaccard similarity and trajectory curvature
    validate   admissibility and oracle property checks
    neighbors  fixed-radius neighbor lists of a point file

CSV goes to --out or stdout; logs go to stderr. Exit codes: 0 success,
1 input or configuration error, 2 internal failure or failed validation.
"""

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from src.applications import (
    EmbeddingStore,
    PairedPointSets,
    SvgdMode,
    TARGET_PRESETS,
    blob_centers,
    cell_distortion_map,
    make_blobs,
    make_clustered_vectors,
    neighborhood_distortion,
    neighborhood_jaccard,
    recall_at_k,
    run_incremental,
    run_svgd,
    trajectory_curvature,
)
from src.applications import build as build_index
from src.benchmarks import BENCH_COLUMNS, DISTRIBUTIONS, generate, make_structures, run_bench
from src.core.config_manager import AppConfig, ConfigManager
from src.core.error_handler import InputError, InvariantViolationError, handle_error
from src.core.logging_manager import get_logging_manager, initialize_logging
from src.octree import Aabb, OctreeConfig, build_neighbor_lists, check_setting, create, load_octree_config
from src.version import VERSION, version_string
from .io import (
    CELL_COLUMNS,
    INDEX_COLUMNS,
    KNN_COLUMNS,
    METRICS_COLUMNS,
    NEIGHBOR_COLUMNS,
    SVGD_COLUMNS,
    VALIDATE_COLUMNS,
    read_labeled,
    read_points,
    read_trajectory,
    read_vectors,
    rows_frame,
    write_frame,
)
from .manifest import RunManifest, write_manifest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_FAILURE = 2


class CliArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises InputError instead of exiting on bad usage"""

    def error(self, message):
        raise InputError(f"{self.prog}: {message}", field_name='argv',
                         details={'usage': self.format_usage()})


def _cutoff(value: str):
    if value.strip().lower() == 'auto':
        return 'auto'
    return _positive_float(value)


def _positive_float(value: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {value!r}")
    if not number > 0 or number == float('inf'):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value!r}")
    return number


def _positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}")
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value!r}")
    return number


def _non_negative_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}")
    if number < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value!r}")
    return number


def _multiplier(value: str):
    if value.strip().lower() == 'all':
        return 'all'
    return _positive_int(value)


def _common_flags() -> argparse.ArgumentParser:
    common = CliArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help="YAML or JSON application configuration")
    common.add_argument('--octree-config', type=Path, help="JSON object with K, alpha, max_depth, expansion_factor")
    common.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'])
    common.add_argument('--structured-logs', action='store_true', help="JSON-line log records on stderr")
    common.add_argument('--seed', type=_non_negative_int, help="default: DYNOCT_SEED or the config seed")
    common.add_argument('--out', type=Path, help="output CSV (stdout when omitted)")
    return common


def build_parser() -> CliArgumentParser:
    parser = CliArgumentParser(prog='dynoct', description="Dynamic octree toolkit")
    parser.add_argument('--version', action='version', version=version_string())
    sub = parser.add_subparsers(dest='subcommand', metavar='subcommand')
    common = _common_flags()

    p = sub.add_parser('bench', parents=[common], help="benchmark octrees on a generated series")
    p.add_argument('--dist', choices=DISTRIBUTIONS)
    p.add_argument('--scale', type=_positive_float)
    p.add_argument('--K', dest='K', type=_positive_int, action='append')
    p.add_argument('--alpha', type=float)
    p.add_argument('--cutoff', type=_cutoff, help="positive number or 'auto' (mean degree ~20)")
    p.add_argument('--steps', type=_positive_int)
    p.add_argument('--wave-points', type=_positive_int)
    p.add_argument('--wave-frequency', type=_positive_float)
    p.add_argument('--flat', action='store_true', help="include the brute-force baseline")
    p.set_defaults(handler=run_bench_command)

    p = sub.add_parser('svgd', parents=[common], help="Stein variational gradient descent")
    p.add_argument('--n', type=_positive_int)
    p.add_argument('--iters', type=_non_negative_int)
    p.add_argument('--mode', choices=[m.value for m in SvgdMode])
    p.add_argument('--target', choices=sorted(TARGET_PRESETS))
    p.add_argument('--eps', type=_positive_float, help="step size")
    p.add_argument('--bandwidth', help="'median' or a positive number")
    p.add_argument('--compat-norm', action='store_true', default=None)
    p.add_argument('--rebuild-every', type=_non_negative_int)
    p.set_defaults(handler=run_svgd_command)

    p = sub.add_parser('knn', parents=[common], help="incremental kNN classification")
    p.add_argument('--train', type=Path, help="labeled CSV id,x,y,z,label")
    p.add_argument('--test', type=Path, help="labeled CSV id,x,y,z,label")
    p.add_argument('--n-train', type=_positive_int, default=3000)
    p.add_argument('--n-test', type=_positive_int, default=300)
    p.add_argument('--classes', type=_positive_int, default=3)
    p.add_argument('--k', type=_positive_int)
    p.add_argument('--batch-size', type=_positive_int)
    p.set_defaults(handler=run_knn_command)

    p = sub.add_parser('index', parents=[common], help="hybrid vector index")
    p.add_argument('--vectors', type=Path, help="CSV id,v0,...,v{D-1}")
    p.add_argument('--queries', type=Path, help="CSV id,v0,...,v{D-1}")
    p.add_argument('--n', type=_positive_int, default=2000)
    p.add_argument('--dim', type=_positive_int)
    p.add_argument('--num-queries', type=_positive_int, default=20)
    p.add_argument('--clusters', type=_positive_int)
    p.add_argument('--probe', type=_positive_int)
    p.add_argument('--multiplier', type=_multiplier, help="positive integer or 'all'")
    p.add_argument('--topk', type=_positive_int)
    p.set_defaults(handler=run_index_command)

    p = sub.add_parser('metrics', parents=[common], help="structure-preservation metrics")
    p.add_argument('--x', type=Path, help="input-space points id,x,y,z")
    p.add_argument('--z', type=Path, help="latent-space points id,x,y,z")
    p.add_argument('--k', type=_positive_int)
    p.add_argument('--traj', type=Path, help="trajectory CSV point_id,t,x,y,z")
    p.add_argument('--cells-out', type=Path, help="per-leaf distortion CSV")
    p.set_defaults(handler=run_metrics_command)

    p = sub.add_parser('validate', parents=[common], help="admissibility and oracle property suite")
    p.add_argument('--ops', type=_positive_int, default=20000)
    p.add_argument('--K', dest='K', type=_positive_int, action='append')
    p.add_argument('--alpha', type=float, action='append')
    p.add_argument('--queries', type=_positive_int, default=50)
    p.set_defaults(handler=run_validate_command)

    p = sub.add_parser('neighbors', parents=[common], help="fixed-radius neighbor lists")
    p.add_argument('--points', type=Path, required=True, help="CSV id,x,y,z")
    p.add_argument('--cutoff', type=_positive_float, required=True)
    p.set_defaults(handler=run_neighbors_command)

    return parser


# ----------------------------------------------------------------------
# helpers

def _octree_config(args, config: AppConfig) -> OctreeConfig:
    if args.octree_config:
        return load_octree_config(args.octree_config)
    return OctreeConfig.from_settings(config.octree)


def _pick(value, default):
    return default if value is None else value


def _emit(frame, path: Optional[Path], manifest: RunManifest) -> None:
    write_frame(frame, path)
    if path is not None:
        manifest.outputs.append(str(path))


def _padded_bounds(coords: np.ndarray) -> Aabb:
    if len(coords) == 0:
        return Aabb.cube(0.0, 1.0)
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    pad = np.maximum((hi - lo) * 0.05, 1e-6)
    return Aabb(tuple(lo - pad), tuple(hi + pad))


# ----------------------------------------------------------------------
# subcommands

def run_bench_command(args, config: AppConfig, seed: int, manifest: RunManifest) -> int:
    settings = config.bench
    octree = _octree_config(args, config)
    cutoff = _pick(args.cutoff, settings.cutoff)
    series = generate(_pick(args.dist, settings.distribution), seed=seed,
                      scale=_pick(args.scale, settings.scale), steps=_pick(args.steps, settings.steps),
                      wave_points=_pick(args.wave_points, settings.wave_points),
                      wave_frequency=_pick(args.wave_frequency, settings.wave_frequency))
    structures = make_structures(_pick(args.K, settings.K), alpha=_pick(args.alpha, settings.alpha),
                                 include_flat=args.flat, max_depth=octree.max_depth)
    records = run_bench(series, structures, cutoff=None if cutoff == 'auto' else cutoff)
    _emit(rows_frame((r.to_row() for r in records), BENCH_COLUMNS), args.out, manifest)
    return EXIT_OK


def run_svgd_command(args, config: AppConfig, seed: int, manifest: RunManifest) -> int:
    settings = config.svgd
    trajectory = run_svgd(_pick(args.target, settings.target), n=_pick(args.n, settings.n),
                          iterations=_pick(args.iters, settings.iterations),
                          mode=_pick(args.mode, settings.mode), seed=seed,
                          step_size=_pick(args.eps, settings.step_size),
                          bandwidth=_pick(args.bandwidth, settings.bandwidth),
                          compat_norm=_pick(args.compat_norm, settings.compat_norm),
                          rebuild_every=_pick(args.rebuild_every, settings.rebuild_every),
                          record_every=settings.record_every,
                          octree_config=_octree_config(args, config))
    _emit(rows_frame(trajectory.rows(), SVGD_COLUMNS), args.out, manifest)
    return EXIT_OK


def run_knn_command(args, config: AppConfig, seed: int, manifest: RunManifest) -> int:
    if (args.train is None) != (args.test is None):
        raise InputError("--train and --test must be given together", field_name='train')
    if args.train is not None:
        train = read_labeled(args.train)
        test = read_labeled(args.test)
    else:
        centers = blob_centers(args.classes, seed)
        train = make_blobs(args.n_train, args.classes, seed, centers=centers)
        test = make_blobs(args.n_test, args.classes, seed + 1, id_offset=args.n_train, centers=centers)
    records = run_incremental(train, test, k=_pick(args.k, config.knn.k),
                              batch_size=_pick(args.batch_size, config.knn.batch_size),
                              config=_octree_config(args, config))
    rows = ((r.batch_index, r.update_ms, r.query_ms, r.accuracy) for r in records)
    _emit(rows_frame(rows, KNN_COLUMNS), args.out, manifest)
    return EXIT_OK


def run_index_command(args, config: AppConfig, seed: int, manifest: RunManifest) -> int:
    settings = config.index
    if args.vectors is not None:
        ids, vectors = read_vectors(args.vectors, args.dim)
        if args.queries is not None:
            query_ids, queries = read_vectors(args.queries, vectors.shape[1])
        else:
            count = min(args.num_queries, len(ids))
            query_ids, queries = ids[:count], vectors[:count]
    else:
        if args.queries is not None:
            raise InputError("--queries needs --vectors", field_name='queries')
        dim = _pick(args.dim, 32)
        data, _ = make_clustered_vectors(args.n + args.num_queries, dim, _pick(args.clusters, settings.num_clusters),
                                         seed=seed)
        ids, vectors = list(range(args.n)), data[:args.n]
        query_ids, queries = list(range(args.num_queries)), data[args.n:]

    store = EmbeddingStore.from_arrays(ids, vectors)
    index = build_index(store, _pick(args.clusters, settings.num_clusters), seed=seed,
                        max_iter=settings.kmeans_max_iter, power_iterations=settings.power_iterations,
                        octree_config=_octree_config(args, config))
    top_k = _pick(args.topk, settings.top_k)
    probe = _pick(args.probe, settings.probe_clusters)
    multiplier = _pick(args.multiplier, settings.candidate_multiplier)
    multiplier = None if multiplier == 'all' else multiplier

    rows = []
    for query_id, q in zip(query_ids, queries):
        for rank, (result_id, dist) in enumerate(index.query(q, top_k, probe, multiplier), start=1):
            rows.append((query_id, rank, result_id, dist))
    _emit(rows_frame(rows, INDEX_COLUMNS), args.out, manifest)

    recall = recall_at_k(index, list(queries), top_k, probe, multiplier)
    sys.stderr.write(f"recall@{top_k}={recall:.4f}\n")
    return EXIT_OK


def _aligned(x_points, z_points, x_path, z_path):
    x = dict(x_points)
    z = dict(z_points)
    if set(x) != set(z):
        missing = sorted(set(x) ^ set(z))[0]
        raise InputError(f"{x_path} and {z_path} must list the same ids (id {missing} differs)",
                         field_name='id', field_value=missing)
    ids = sorted(x)
    return ids, np.array([x[i] for i in ids]), np.array([z[i] for i in ids])


def run_metrics_command(args, config: AppConfig, seed: int, manifest: RunManifest) -> int:
    if (args.x is None) != (args.z is None):
        raise InputError("--x and --z must be given together", field_name='x')
    if args.x is None and args.traj is None:
        raise InputError("metrics needs --x/--z, --traj or both", field_name='x')
    if args.cells_out is not None and args.x is None:
        raise InputError("--cells-out needs --x and --z", field_name='cells_out')

    rows: List[tuple] = []
    cells = None
    if args.x is not None:
        ids, X, Z = _aligned(read_points(args.x), read_points(args.z), args.x, args.z)
        pairs = PairedPointSets(X, Z, k=_pick(args.k, config.metrics.k), config=_octree_config(args, config))
        distortion = neighborhood_distortion(pairs)
        jaccard = neighborhood_jaccard(pairs)
        for name, summary in (('distortion', distortion), ('jaccard', jaccard)):
            rows.extend(('point', point_id, name, value) for point_id, value in zip(ids, summary.values.tolist()))
            rows.extend(('summary', '', f"{name}_{stat}", getattr(summary, stat)) for stat in ('mean', 'median', 'max'))
        if args.cells_out is not None:
            cells = cell_distortion_map(pairs, distortion)

    if args.traj is not None:
        traj = read_trajectory(args.traj)
        curvature = trajectory_curvature(traj)
        rows.extend(('point', point_id, 'curvature', value)
                    for point_id, value in zip(traj.ids, curvature.values.tolist()))
        rows.extend(('summary', '', f"curvature_{stat}", getattr(curvature, stat))
                    for stat in ('mean', 'median', 'max'))

    _emit(rows_frame(rows, METRICS_COLUMNS), args.out, manifest)
    if cells is not None:
        cell_rows = ((*c.lo, *c.hi, c.count, c.mean_distortion) for c in cells)
        _emit(rows_frame(cell_rows, CELL_COLUMNS), args.cells_out, manifest)
    return EXIT_OK


def run_validate_command(args, config: AppConfig, seed: int, manifest: RunManifest) -> int:
    octree = _octree_config(args, config)
    Ks = args.K or [10, 100, 1000]
    alphas = args.alpha or [1.0, 2.0]
    results = []
    for K in Ks:
        for alpha in alphas:
            setting = OctreeConfig(K=K, alpha=alpha, max_depth=octree.max_depth,
                                   expansion_factor=octree.expansion_factor)
            results.append(check_setting(setting, args.ops, seed=seed, queries=args.queries))
    _emit(rows_frame((r.to_row() for r in results), VALIDATE_COLUMNS), args.out, manifest)

    failed = [r for r in results if not r.passed]
    sys.stderr.write(f"validate: {len(results) - len(failed)}/{len(results)} settings passed\n")
    if failed:
        raise InvariantViolationError(
            f"{len(failed)} of {len(results)} settings failed validation",
            violations=[f"K={r.K} alpha={r.alpha}: {len(r.report.violations)} admissibility violations, "
                        f"{r.oracle_mismatches} oracle mismatches" for r in failed],
            details={'first_violations': [v for r in failed for v in r.report.violations[:3]]})
    return EXIT_OK


def run_neighbors_command(args, config: AppConfig, seed: int, manifest: RunManifest) -> int:
    points = read_points(args.points)
    coords = np.array([p for _, p in points], dtype=np.float64).reshape(-1, 3)
    tree = create(_octree_config(args, config), _padded_bounds(coords))
    tree.bulk_load(points)
    neighbors = build_neighbor_lists(tree, args.cutoff)
    logger.info(f"{neighbors.pair_count()} pairs within {args.cutoff}, mean degree {neighbors.mean_degree():.3f}")
    _emit(rows_frame(neighbors.to_rows(), NEIGHBOR_COLUMNS), args.out, manifest)
    return EXIT_OK


# ----------------------------------------------------------------------
# dispatch

def _load_config(args) -> AppConfig:
    config = ConfigManager().load_config(args.config)
    logging_config: Dict[str, Any] = asdict(config.logging)
    if args.log_level:
        logging_config['level'] = args.log_level
    if args.structured_logs:
        logging_config['structured_logging'] = True
    initialize_logging(logging_config)
    return config


def _resolved_flags(args) -> Dict[str, Any]:
    return {key: (str(value) if isinstance(value, Path) else value)
            for key, value in sorted(vars(args).items()) if key != 'handler'}


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse `argv`, run the subcommand and return the process exit code.

    0 on success; 1 for usage, input, configuration, lookup and state
    errors; 2 for internal failures and failed validation.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        sys.stderr.write(parser.format_help())
        return EXIT_USER_ERROR

    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_request:
        # --help and --version
        return int(exit_request.code or 0)
    except InputError as e:
        sys.stderr.write(e.details.get('usage', parser.format_usage()))
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USER_ERROR
    if args.subcommand is None:
        sys.stderr.write(parser.format_help())
        return EXIT_USER_ERROR

    handler: Callable[..., int] = args.handler
    manifest = RunManifest(args.subcommand, _resolved_flags(args), None)
    exit_code = EXIT_FAILURE
    try:
        config = _load_config(args)
        seed = _pick(args.seed, config.seed)
        manifest.seed = seed
        get_logging_manager().log_application_start(VERSION, {'subcommand': args.subcommand, 'seed': seed})
        exit_code = handler(args, config, seed, manifest)
        write_manifest(manifest.finish())
    except Exception as e:
        context = handle_error(e, {'subcommand': args.subcommand})
        sys.stderr.write(f"error: {context.message}\n")
        exit_code = EXIT_USER_ERROR if context.is_user_error else EXIT_FAILURE
    get_logging_manager().log_application_stop(VERSION, exit_code)
    return exit_code


def main() -> None:
    sys.exit(dispatch())

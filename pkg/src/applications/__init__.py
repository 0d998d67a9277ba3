"""
Applications Module

Workloads built on the dynamic octree:
- svgd: Stein variational gradient descent with truncated kernel interactions
- knn_classifier: incremental k-nearest-neighbor classification
- embed_index: k-means partition + per-cluster 3D octree vector index
- structure_metrics: distortion, Jaccard and curvature metrics for paired point sets
"""

from .svgd import (
    SvgdMode,
    TargetDistribution,
    GaussianMixture,
    TARGET_PRESETS,
    ParticleEnsemble,
    StepStats,
    SvgdTrajectory,
    gaussian,
    get_target,
    check_gradient,
    rbf_kernel,
    rbf_kernel_grad,
    truncation_radius,
    median_bandwidth,
    parse_bandwidth,
    svgd_step_naive,
    svgd_step_octree,
    build_particle_octree,
    run_svgd
)

from .knn_classifier import (
    LabeledPoint,
    KnnClassifier,
    BruteForceClassifier,
    KnnBatchRecord,
    BatchSweepRecord,
    vote,
    make_blobs,
    blob_centers,
    batches,
    run_incremental,
    batch_size_sweep
)

from .embed_index import (
    EmbeddingStore,
    ClusterPartition,
    HybridIndex,
    build,
    exact_search,
    fit_projection,
    recall_at_k,
    make_clustered_vectors
)

from .structure_metrics import (
    PairedPointSets,
    Trajectory,
    MetricSummary,
    CellDistortion,
    neighborhood_distortion,
    neighborhood_jaccard,
    trajectory_curvature,
    cell_distortion_map
)

__all__ = [
    # SVGD
    'SvgdMode',
    'TargetDistribution',
    'GaussianMixture',
    'TARGET_PRESETS',
    'ParticleEnsemble',
    'StepStats',
    'SvgdTrajectory',
    'gaussian',
    'get_target',
    'check_gradient',
    'rbf_kernel',
    'rbf_kernel_grad',
    'truncation_radius',
    'median_bandwidth',
    'parse_bandwidth',
    'svgd_step_naive',
    'svgd_step_octree',
    'build_particle_octree',
    'run_svgd',

    # KNN
    'LabeledPoint',
    'KnnClassifier',
    'BruteForceClassifier',
    'KnnBatchRecord',
    'BatchSweepRecord',
    'vote',
    'make_blobs',
    'blob_centers',
    'batches',
    'run_incremental',
    'batch_size_sweep',

    # Vector index
    'EmbeddingStore',
    'ClusterPartition',
    'HybridIndex',
    'build',
    'exact_search',
    'fit_projection',
    'recall_at_k',
    'make_clustered_vectors',

    # Structure metrics
    'PairedPointSets',
    'Trajectory',
    'MetricSummary',
    'CellDistortion',
    'neighborhood_distortion',
    'neighborhood_jaccard',
    'trajectory_curvature',
    'cell_distortion_map'
]

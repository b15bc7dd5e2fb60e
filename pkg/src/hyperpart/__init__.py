"""Spectral partitioning of weighted uniform hypergraphs.

Public surface: core types and formats, planted block models, the flatten/
normalize/embed/cluster pipeline with its baselines, sampled affinity
estimation, union-of-subspaces clustering, metrics, and the experiment
harness.
"""

from .core import (
    ConvergenceError,
    DataError,
    EdgeWeightOracle,
    EmptySupportError,
    HypergraphError,
    ModelError,
    Partition,
    SizeCapError,
    WeightedUniformHypergraph,
    all_edges_array,
    derive_seed,
    enumerate_edges,
    hypergraph_from_oracle,
    make_rng,
    oracle_from_hypergraph,
    read_hypergraph,
    read_partition,
    stable_hash64,
    write_hypergraph,
    write_partition,
)
from .metrics import (
    ConfusionMatrix,
    clustering_error,
    fractional_error,
    normalized_associativity,
    tensor_trace_nassoc,
)
from .planted import (
    ExpectedQuantities,
    PlantedSpec,
    expected_affinity,
    expected_block_matrix,
    expected_quantities,
    generate,
    pq_closed_forms,
)
from .sampling import (
    EdgeMultiset,
    SampledAffinity,
    SamplingPlan,
    build_plan,
    default_sample_count,
    draw,
    estimate_affinity,
    expectation_matrix,
    proportional_probs,
    sampled_ttm_partition,
)
from .spectral import (
    FlattenedAffinity,
    KMeansResult,
    SpectralEmbedding,
    dominant_eigenvectors,
    flatten,
    hosvd_partition,
    kmeans,
    nhcut_matrix,
    nhcut_partition,
    normalize,
    row_normalize,
    save_embedding_csv,
    ttm_partition,
    ttm_partition_from_affinity,
    unfolding_gram,
)
from .subspace import (
    PointCloud,
    SubspaceSpec,
    TetrisConfig,
    TetrisResult,
    curvature_hypergraph,
    edge_weight_oracle,
    estimate_sigma,
    fit_error,
    fit_error_batch,
    generate_subspaces,
    read_pointcloud,
    sigma_candidates,
    tetris,
    uniform_sampled_ttm_subspace,
    write_pointcloud,
)
from .experiments import (
    Cell,
    ExperimentConfig,
    ResultRow,
    RunArtifacts,
    build_cells,
    load_config,
    run_experiment,
    run_trial,
    summarize,
    trial_seed,
)

__version__ = "0.1.0"

"""Hypothesis testing for layer differences in dynamic multiplex graphs.

The package embeds all (layer, time) adjacency blocks jointly through a
truncated SVD of the doubly unfolded matrix, measures how far the
layer-specific embedding blocks deviate from their mean, and calibrates
that statistic with a parametric bootstrap. Samplers for the matching
latent position and blockmodel generative models, scripted simulation
studies, diagnostics, and a CLI round out the toolkit.
"""

__version__ = "0.1.0"

from .diagnostics import ConsistencyCurve, align_least_squares, consistency_sweep
from .embedding import (
    DuaseEmbedding,
    duase,
    layer_mean,
    scree_elbow,
    select_dimension,
)
from .errors import (
    DegenerateInputError,
    DomainError,
    GeometryError,
    ValidationError,
)
from .experiments import (
    NullPvalueStudy,
    PowerTable,
    SimulationConfig,
    WorkflowReport,
    benchmark_spec,
    null_pvalue_cdf,
    power_table,
    replicate_workflow,
    synthetic_conditions,
)
from .graphs import (
    MultiplexGraph,
    UnfoldedMatrix,
    average_replicates,
    refold,
    stack_layers,
    unfold,
)
from .inference import (
    PairwiseResults,
    TestResult,
    bootstrap_test,
    bootstrap_test_averaged,
    layer_deviation_statistic,
    pairwise_tests,
)
from .io import (
    export_graph,
    ingest,
    load_embedding,
    load_latents,
    save_embedding,
    save_latents,
)
from .linalg import (
    TruncatedSvd,
    frobenius_norm,
    svd_truncated,
    two_to_infinity_norm,
)
from .rng import SeedSpec
from .samplers import (
    BlockModelSpec,
    LatentPair,
    sample_dmprdpg,
    sample_dmpsbm,
    sbm_to_latents,
)

__all__ = [
    "__version__",
    "BlockModelSpec",
    "ConsistencyCurve",
    "DegenerateInputError",
    "DomainError",
    "DuaseEmbedding",
    "GeometryError",
    "LatentPair",
    "MultiplexGraph",
    "NullPvalueStudy",
    "PairwiseResults",
    "PowerTable",
    "SeedSpec",
    "SimulationConfig",
    "TestResult",
    "TruncatedSvd",
    "UnfoldedMatrix",
    "ValidationError",
    "WorkflowReport",
    "align_least_squares",
    "average_replicates",
    "benchmark_spec",
    "bootstrap_test",
    "bootstrap_test_averaged",
    "consistency_sweep",
    "duase",
    "export_graph",
    "frobenius_norm",
    "ingest",
    "layer_deviation_statistic",
    "layer_mean",
    "load_embedding",
    "load_latents",
    "null_pvalue_cdf",
    "pairwise_tests",
    "power_table",
    "refold",
    "replicate_workflow",
    "sample_dmprdpg",
    "sample_dmpsbm",
    "save_embedding",
    "save_latents",
    "sbm_to_latents",
    "scree_elbow",
    "select_dimension",
    "stack_layers",
    "svd_truncated",
    "synthetic_conditions",
    "two_to_infinity_norm",
    "unfold",
]

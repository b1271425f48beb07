"""Nonparametric collaborative filtering with personalized graph signals.

The model scores items by filtering each user's personalized graph
signal (their user-similarity row concatenated with their interaction
row) on an augmented user+item similarity graph, using a mix of an ideal
low-pass spectral projector and one linear neighborhood-aggregation
pass.  There is nothing to train beyond one truncated
eigendecomposition of the graph.
"""

from .sparse import InteractionMatrix, gram_left, gram_right, hconcat, matvec
from .graph import (
    AugmentedGraph,
    NormalizedSimilarity,
    PersonalizedSignalMatrix,
    build_augmented_graph,
    build_normalized_interaction,
    build_personalized_signal,
)
from .spectral import (
    ConvergenceError,
    SpectralBasis,
    SpectralDiagnostics,
    diagnostics,
    ideal_lowpass_apply,
    load_basis,
    save_basis,
    total_variation,
    truncated_eigenbasis,
)
from .pipeline import (
    FilterConfig,
    PgspModel,
    PredictionMatrix,
    RankedRecommendations,
    mixed_filter_apply,
    rank_topn,
    run_pgsp,
    write_recommendations_tsv,
)
from .oracle import DenseModel, oracle_run
from .evaluation import (
    Dataset,
    DatasetFormatError,
    MetricsReport,
    compute_metrics,
    evaluate_model,
    load_dataset,
    sweep_phi,
    synthetic_clustered_dataset,
    user_recall_ndcg,
)

__version__ = "0.1.0"

__all__ = [
    "InteractionMatrix",
    "matvec",
    "gram_left",
    "gram_right",
    "hconcat",
    "NormalizedSimilarity",
    "AugmentedGraph",
    "PersonalizedSignalMatrix",
    "build_normalized_interaction",
    "build_augmented_graph",
    "build_personalized_signal",
    "SpectralBasis",
    "SpectralDiagnostics",
    "ConvergenceError",
    "truncated_eigenbasis",
    "ideal_lowpass_apply",
    "total_variation",
    "diagnostics",
    "save_basis",
    "load_basis",
    "FilterConfig",
    "PgspModel",
    "PredictionMatrix",
    "RankedRecommendations",
    "mixed_filter_apply",
    "run_pgsp",
    "rank_topn",
    "write_recommendations_tsv",
    "DenseModel",
    "oracle_run",
    "Dataset",
    "DatasetFormatError",
    "MetricsReport",
    "load_dataset",
    "compute_metrics",
    "user_recall_ndcg",
    "evaluate_model",
    "sweep_phi",
    "synthetic_clustered_dataset",
    "__version__",
]

"""rankworth: worth-based models for partial rankings with ties.

Fit item worths to (possibly tied, possibly partial) rankings by maximum
likelihood or with ghost-item regularization, compute standard errors and
quasi-variances, and grow covariate-driven partitioning trees whose leaves
carry separate fits.
"""

from .errors import DataError, ModelError
from .fit import (
    FitConfig,
    ModelFit,
    convergence_check,
    fit,
    iterative_scaling_step,
    quasi_newton_fit,
    steffensen_accelerate,
)
from .inference import (
    ModelMetrics,
    QuasiVariances,
    Summary,
    comparison_intervals,
    model_metrics,
    quasi_variances,
    summarize,
    vcov,
)
from .likelihood import (
    ChoiceEvent,
    EventSet,
    Parameters,
    SufficientStats,
    choice_denominator,
    choice_events,
    enumerate_tied_rankings,
    expected_sufficient_stats,
    log_likelihood,
    observed_sufficient_stats,
    ranking_log_probability,
    set_strength,
)
from .network import (
    GHOST_ITEM,
    AdjacencyMatrix,
    ConnectivityReport,
    adjacency,
    augment_with_pseudo_rankings,
    connectivity,
)
from .rankings import (
    GroupedRankings,
    OrderingsTable,
    RankingsTable,
    complete_orderings,
    decode_orderings,
    format_ranking,
    from_orderings,
    from_rank_matrix,
    group_rankings,
    subset_items,
)
from .io import (
    read_model_json,
    read_preflib_soc,
    read_rank_csv,
    write_model_json,
    write_rank_csv,
)
from .tree import (
    Covariate,
    CovariateFrame,
    PLTree,
    Split,
    TreeConfig,
    best_split,
    grow_tree,
    instability_test,
    predict_node,
    score_contributions,
    write_tree_plot_csv,
)

__version__ = "0.1.0"

__all__ = [
    "DataError", "ModelError",
    "FitConfig", "ModelFit", "fit", "quasi_newton_fit",
    "iterative_scaling_step", "steffensen_accelerate", "convergence_check",
    "ModelMetrics", "QuasiVariances", "Summary",
    "comparison_intervals", "model_metrics", "quasi_variances", "summarize", "vcov",
    "ChoiceEvent", "EventSet", "Parameters", "SufficientStats",
    "choice_denominator", "choice_events", "enumerate_tied_rankings",
    "expected_sufficient_stats", "log_likelihood", "observed_sufficient_stats",
    "ranking_log_probability", "set_strength",
    "GHOST_ITEM", "AdjacencyMatrix", "ConnectivityReport",
    "adjacency", "augment_with_pseudo_rankings", "connectivity",
    "GroupedRankings", "OrderingsTable", "RankingsTable",
    "complete_orderings", "decode_orderings", "format_ranking",
    "from_orderings", "from_rank_matrix", "group_rankings", "subset_items",
    "read_model_json", "read_preflib_soc", "read_rank_csv",
    "write_model_json", "write_rank_csv",
    "Covariate", "CovariateFrame", "PLTree", "Split", "TreeConfig",
    "best_split", "grow_tree", "instability_test", "predict_node",
    "score_contributions", "write_tree_plot_csv",
    "__version__",
]

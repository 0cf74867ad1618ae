"""Round-based hierarchical clustering with sub-cluster components.

Estimators follow the scikit-learn conventions (``fit``, ``labels_``,
``get_params``); the functional layer underneath works on plain arrays.
"""

from .baselines import (
    Affinity,
    DPMeansPlusPlus,
    DpMeansParams,
    SerialDPMeans,
    dp_means_cost,
    run_affinity,
    run_dp_means_pp,
    run_serial_dp_means,
)
from .core import (
    Dataset,
    Dendrogram,
    Linkage,
    LinkageSpec,
    Metric,
    Partition,
    ThresholdSchedule,
    canonicalize_partition,
    dissimilarity_matrix,
    pairwise_dissimilarity,
    tree_consistent_check,
)
from .evaluation import (
    PairCounts,
    PurityEstimate,
    dendrogram_purity,
    pairwise_f1,
    select_round_by_dp_cost,
    select_round_by_k,
)
from .hac import HAC, MergeStep, hac_epsilon, hac_thresholds_for_scc, run_hac
from .linkage import linkage_value, merged_linkage_update, nearest_cluster
from .neighbors import NeighborGraph, build_knn_graph
from .scc import SCC, RoundLimitExceeded, RoundTrace, SccConfig, merge_components, run_scc, sub_cluster_edges
from .synthesis import (
    ModelSeparationInstance,
    SeparationSpec,
    check_model_separation,
    generate_mixture,
    generate_model_separated,
    generate_separated,
    model_separated_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "Affinity", "DPMeansPlusPlus", "DpMeansParams", "SerialDPMeans", "dp_means_cost",
    "run_affinity", "run_dp_means_pp", "run_serial_dp_means",
    "Dataset", "Dendrogram", "Linkage", "LinkageSpec", "Metric", "Partition",
    "ThresholdSchedule", "canonicalize_partition", "dissimilarity_matrix",
    "pairwise_dissimilarity", "tree_consistent_check",
    "PairCounts", "PurityEstimate", "dendrogram_purity", "pairwise_f1",
    "select_round_by_dp_cost", "select_round_by_k",
    "HAC", "MergeStep", "hac_epsilon", "hac_thresholds_for_scc", "run_hac",
    "linkage_value", "merged_linkage_update", "nearest_cluster",
    "NeighborGraph", "build_knn_graph",
    "SCC", "RoundLimitExceeded", "RoundTrace", "SccConfig", "merge_components", "run_scc",
    "sub_cluster_edges",
    "ModelSeparationInstance", "SeparationSpec", "check_model_separation", "generate_mixture",
    "generate_model_separated", "generate_separated", "model_separated_schedule",
]

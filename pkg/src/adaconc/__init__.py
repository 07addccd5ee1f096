"""Regression trees with uniform concentration guarantees.

Building blocks for valid recursive partitions, fitted and partition-optimal
trees, closed-form adaptive concentration bounds, dyadic rectangle families,
the guess-and-check forest trainer, and seeded simulation experiments.
"""

__version__ = "0.1.0"

from .core import (Dataset, DensityEnvelope, MembershipRule, Rectangle, count_points,  # noqa: E402
                   rank_transform, support, volume)
from .partition import Partition, SplitNode, leaf_of, max_support_size, split, validate  # noqa: E402
from .trees import Forest, MeanOracle, OptimalTree, ValidTree, fit, optimal, predict, sup_discrepancy  # noqa: E402
from .bounds import (BoundParams, adaptive_bound, adaptive_bound_full, approx_params,  # noqa: E402
                     generalization_rate, log_cardinality_bound, nonadaptive_bound, posi_intervals,
                     split_threshold)
from .gac import GacConfig, best_split, score_split, train_forest, train_tree, try_split  # noqa: E402

__all__ = [
    "Dataset", "DensityEnvelope", "MembershipRule", "Rectangle", "count_points", "rank_transform",
    "support", "volume", "Partition", "SplitNode", "leaf_of", "max_support_size", "split", "validate",
    "Forest", "MeanOracle", "OptimalTree", "ValidTree", "fit", "optimal", "predict", "sup_discrepancy",
    "BoundParams", "adaptive_bound", "adaptive_bound_full", "approx_params", "generalization_rate",
    "log_cardinality_bound", "nonadaptive_bound", "posi_intervals", "split_threshold",
    "GacConfig", "best_split", "score_split", "train_forest", "train_tree", "try_split",
]

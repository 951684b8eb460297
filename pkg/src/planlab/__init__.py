"""Desk-scale sandbox for learned cardinality estimation and join ordering.

The pipeline: columnar relations (`data`) feed catalog statistics and
encodings (`catalog`); an exact executor (`executor`) supplies ground-truth
cardinalities; a scratch-built network toolkit (`nn`) powers the recursive
subquery-representation model (`models`); a classical histogram estimator
(`baseline`) provides the comparison point; a Q-learning agent (`agent`)
builds left-deep plans over the learned states; and `workload` orchestrates
seeded, reproducible experiments over all of it.
"""

from .data import Relation, gen_synthetic, load_csv
from .query import JoinPredicate, QuerySpec, SelectionAction, JoinAction, subquery_of
from .executor import nested_loop_cardinality, true_cardinality
from .catalog import Catalog, build_db_vector, compute_stats, encode_action
from .models import CardinalityModel, build_model, load_model, predict_sequence, save_model
from .agent import AgentConfig, best_plan, exhaustive_optimum, run_training

__version__ = "0.1.0"

__all__ = [
    "AgentConfig",
    "Catalog",
    "CardinalityModel",
    "JoinAction",
    "JoinPredicate",
    "QuerySpec",
    "Relation",
    "SelectionAction",
    "best_plan",
    "build_db_vector",
    "build_model",
    "compute_stats",
    "encode_action",
    "exhaustive_optimum",
    "gen_synthetic",
    "load_csv",
    "load_model",
    "nested_loop_cardinality",
    "predict_sequence",
    "run_training",
    "save_model",
    "subquery_of",
    "true_cardinality",
    "__version__",
]

"""Link prediction with path-labeled enclosing subgraphs and a jointly trained GNN."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .graph import (EnclosingSubgraph, Graph, adjacency_query, extract_enclosing_subgraph,
                    load_edge_list)
from .model import SegConfig, SegModel, SegOutput, predict_link
from .structure import (LabelAssignment, PathSet, drnl_label, enumerate_simple_paths,
                        heuristic_score, one_hot_encode, path_label)
from .training import (EvalReport, SplitDataset, evaluate_hits_at_k, evaluate_mrr,
                       generate_synthetic_benchmark, sample_negatives, train)

__all__ = [
    "Graph", "EnclosingSubgraph", "adjacency_query", "extract_enclosing_subgraph", "load_edge_list",
    "SegConfig", "SegModel", "SegOutput", "predict_link", "LabelAssignment", "PathSet",
    "drnl_label", "enumerate_simple_paths", "heuristic_score", "one_hot_encode", "path_label",
    "EvalReport", "SplitDataset", "evaluate_hits_at_k", "evaluate_mrr",
    "generate_synthetic_benchmark", "sample_negatives", "train",
]

"""Heterogeneous transaction-graph fraud scoring with subgraph explanations."""

__version__ = "0.1.0"

from .graph import (EdgeType, HeteroGraph, NodeType, TransactionRecord,
                    build_graph, build_homogeneous_view, filter_low_degree,
                    read_log, write_log)
from .model import PredictorConfig, PredictorParams, full_config
from .sampling import chronological_split, minibatches, sample_khop
from .tensor import Tape, Tensor

__all__ = [
    "EdgeType",
    "HeteroGraph",
    "NodeType",
    "TransactionRecord",
    "Tape",
    "Tensor",
    "PredictorConfig",
    "PredictorParams",
    "full_config",
    "build_graph",
    "build_homogeneous_view",
    "filter_low_degree",
    "chronological_split",
    "minibatches",
    "sample_khop",
    "read_log",
    "write_log",
]

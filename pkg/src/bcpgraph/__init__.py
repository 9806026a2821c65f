"""Bayesian change point analysis of linear models on graphs."""
from .graph import (Graph, GraphError, build_grid_graph, build_mst_graph, build_path_graph,
                    load_edge_list)
from .likelihood import ModelConfig, log_incomplete_beta, log_joint_rho_tau
from .models import fit_classical_path, fit_graph_regression, fit_multivariate_path
from .partition import Dataset, Partition, boundary_length, within_between_ss
from .posterior import PosteriorSummary, aggregate, evaluate_mse, w0_star
from .sampler import McmcState, SamplerSchedule, run_chain

__all__ = [
    "Graph", "GraphError", "build_grid_graph", "build_mst_graph", "build_path_graph",
    "load_edge_list", "ModelConfig", "log_incomplete_beta", "log_joint_rho_tau",
    "fit_classical_path", "fit_graph_regression", "fit_multivariate_path", "Dataset",
    "Partition", "boundary_length", "within_between_ss", "PosteriorSummary", "aggregate",
    "evaluate_mse", "w0_star", "McmcState", "SamplerSchedule", "run_chain",
]
__version__ = "0.1.0"

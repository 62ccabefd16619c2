"""Distributed maximum consensus over noisy communication links.

Engines for naive flooding (naive-MC), the ADMM iteration (D-MC) and its
noise-robust variant (RD-MC), plus a seeded Monte Carlo harness that turns
them into network-wide MSE curves.
"""

from .consensus import (
    PenaltyParams,
    ProblemInstance,
    Trajectory,
    run,
    simulate,
)
from .graph import Graph, diameter, path_graph, random_connected_graph
from .harness import SimConfig, figure_preset, run_experiment, run_preset, write_csv
from .metrics import MseCurve, evaluate_objective, network_mse, steady_state_mse, true_max
from .noise import LinkNoiseModel, sample, stream_for

__all__ = [
    "Graph", "LinkNoiseModel", "MseCurve", "PenaltyParams", "ProblemInstance",
    "SimConfig", "Trajectory", "diameter", "evaluate_objective", "figure_preset",
    "network_mse", "path_graph", "random_connected_graph", "run", "run_experiment",
    "run_preset", "sample", "simulate", "steady_state_mse", "stream_for", "true_max",
    "write_csv",
]

"""Threshold connection admission control at an OFDMA subscriber station.

Builds the frame-level Markov chain over (MMPP phase, queue length,
connections), solves for its stationary distribution and derives
connection- and packet-level metrics; a Monte-Carlo simulator of the same
dynamics serves as a cross-check.
"""

from .chain import (StateIndexer, StationaryDistribution, TransitionMatrix, build_transition_matrix,
                    queue_kernel, solve_stationary, truncation_check)
from .config import SweepSpec, SystemConfig, format_config, load_config, reference_config, parse_config
from .metrics import MetricsReport, compute_metrics, erlang_b
from .sim import SimConfig, SimReport, simulate

__version__ = "0.1.0"

__all__ = [
    "StateIndexer", "StationaryDistribution", "TransitionMatrix", "build_transition_matrix",
    "queue_kernel", "solve_stationary", "truncation_check",
    "SweepSpec", "SystemConfig", "format_config", "load_config", "reference", "parse_config",
    "MetricsReport", "compute_metrics", "erlang_b",
    "SimConfig", "SimReport", "simulate",
]

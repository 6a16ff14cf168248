"""Connection-level and packet-level performance measures from ``pi``."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .chain import StationaryDistribution, TransitionMatrix

METRIC_NAMES = (
    "p_block", "n_connections", "n_queue", "n_drop",
    "lambda_bar", "p_drop", "throughput", "delay",
)


@dataclass(frozen=True)
class MetricsReport:
    p_block: float
    n_connections: float
    n_queue: float
    n_drop: float
    lambda_bar: float
    p_drop: float
    throughput: float
    delay: float
    mode: str = "consistent"
    delay_defined: bool = True

    @property
    def flow_residual(self) -> float:
        """``lambda_bar - throughput - n_drop``; zero in consistent mode."""
        return self.lambda_bar - self.throughput - self.n_drop

    def values(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_NAMES}

    def as_dict(self) -> dict:
        return asdict(self)


def erlang_b(load: float, servers: int) -> float:
    """Erlang loss probability via the stable recursion."""
    if load < 0 or servers < 0:
        raise ValueError("load and servers must be nonnegative")
    b = 1.0
    for n in range(1, int(servers) + 1):
        b = load * b / (n + load * b)
    return b


def _grid(pi):
    return pi.as_array() if isinstance(pi, StationaryDistribution) else np.asarray(pi)


def blocking_probability(pi) -> float:
    """Probability of holding the maximum number of connections."""
    return float(_grid(pi)[:, :, -1].sum())


def avg_connections(pi) -> float:
    g = _grid(pi)
    return float(g.sum(axis=(0, 1)) @ np.arange(g.shape[2]))


def avg_queue_length(pi) -> float:
    g = _grid(pi)
    return float(g.sum(axis=(0, 2)) @ np.arange(g.shape[1]))


def drop_metrics(pi, P: TransitionMatrix, mmpp_rate: float, mode="consistent"):
    """``(n_drop, lambda_bar, p_drop)``.

    ``paper_literal`` takes the mean arrival rate as ``mmpp_rate * N_k``;
    ``consistent`` uses the exact mean of the capped aggregate arrivals.
    """
    vec = pi.pi if isinstance(pi, StationaryDistribution) else np.ravel(pi)
    n_drop = float(vec @ P.expected_drops)
    if mode == "paper_literal":
        lambda_bar = mmpp_rate * avg_connections(pi)
    elif mode == "consistent":
        lambda_bar = float(vec @ P.expected_arrivals)
    else:
        raise ValueError(f"unknown metric mode {mode!r}")
    p_drop = n_drop / lambda_bar if lambda_bar > 0 else 0.0
    return n_drop, lambda_bar, p_drop


def throughput_and_delay(p_drop, n_queue, lambda_bar, mmpp_rate, mode="consistent"):
    """``(throughput, delay, delay_defined)``; delay is NaN when throughput is 0."""
    if mode == "paper_literal":
        eta = mmpp_rate * (1.0 - p_drop)
    elif mode == "consistent":
        eta = lambda_bar * (1.0 - p_drop)
    else:
        raise ValueError(f"unknown metric mode {mode!r}")
    if eta > 0:
        return eta, n_queue / eta, True
    return eta, math.nan, False


def compute_metrics(pi: StationaryDistribution, P: TransitionMatrix, mmpp_rate: float,
                    mode="consistent") -> MetricsReport:
    p_block = blocking_probability(pi)
    n_k = avg_connections(pi)
    n_j = avg_queue_length(pi)
    n_drop, lambda_bar, p_drop = drop_metrics(pi, P, mmpp_rate, mode)
    eta, delay, ok = throughput_and_delay(p_drop, n_j, lambda_bar, mmpp_rate, mode)
    return MetricsReport(p_block, n_k, n_j, n_drop, lambda_bar, p_drop, eta, delay, mode, ok)

"""Packet arrivals per frame and connection-level birth-death steps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .channel import convolve_power
from .errors import InvalidParams

MODES = ("cac", "no_cac")

MS_PER_MINUTE = 60_000.0


@dataclass(frozen=True)
class ConnectionParams:
    """Connection dynamics.

    ``rho`` is in connections per minute, ``mean_holding`` and ``frame`` in
    minutes. ``threshold`` is C under CAC and the truncation level C_tr
    otherwise.
    """

    rho: float
    mean_holding: float
    threshold: int
    frame: float = 1.0 / MS_PER_MINUTE
    mode: str = "cac"

    def __post_init__(self):
        if not (math.isfinite(self.rho) and self.rho >= 0):
            raise InvalidParams(f"connection arrival rate must be >= 0, got {self.rho!r}")
        if not (math.isfinite(self.mean_holding) and self.mean_holding > 0):
            raise InvalidParams(f"mean holding time must be > 0, got {self.mean_holding!r}")
        if not (math.isfinite(self.frame) and self.frame > 0):
            raise InvalidParams(f"frame duration must be > 0, got {self.frame!r}")
        if int(self.threshold) != self.threshold or self.threshold < 1:
            raise InvalidParams(f"connection threshold must be an integer >= 1, got {self.threshold!r}")
        if self.mode not in MODES:
            raise InvalidParams(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def departure_rate(self) -> float:
        return 1.0 / self.mean_holding

    @property
    def offered_load(self) -> float:
        """Offered connection load in Erlangs."""
        return self.rho * self.mean_holding


def per_connection_arrival_pmf(lam: float, A: int) -> np.ndarray:
    """Poisson(lam) packets on 0..A with the tail ``Pr[X >= A]`` lumped at A."""
    if not (math.isfinite(lam) and lam >= 0):
        raise InvalidParams(f"arrival rate must be >= 0, got {lam!r}")
    if int(A) != A or A < 1:
        raise InvalidParams(f"arrival cap A must be an integer >= 1, got {A!r}")
    A = int(A)
    out = np.zeros(A + 1)
    if lam == 0:
        out[0] = 1.0
        return out
    n = np.arange(A)
    out[:A] = np.exp(n * math.log(lam) - lam - special.gammaln(n + 1))
    # Pr[Poisson(lam) >= A] is the regularized lower incomplete gamma P(A, lam)
    out[A] = special.gammainc(A, lam)
    return out


def aggregate_arrival_pmf(per_conn: np.ndarray, k: int) -> np.ndarray:
    """Packets per frame from ``k`` independent identical connections."""
    if int(k) != k or k < 0:
        raise InvalidParams(f"connection count must be a nonnegative integer, got {k!r}")
    return convolve_power(np.asarray(per_conn, dtype=float), int(k))


def step_probabilities(p: ConnectionParams) -> tuple[float, np.ndarray]:
    """Per-frame arrival probability and departure probability for every k."""
    a = -math.expm1(-p.rho * p.frame)
    k = np.arange(p.threshold + 1)
    d = -np.expm1(-k * p.departure_rate * p.frame)
    return a, d


def connection_transition_probs(k: int, p: ConnectionParams) -> tuple[float, float, float]:
    """``(p_up, p_down, p_stay)`` for one frame starting with ``k`` connections.

    At most one connection event resolves per frame; an arrival coinciding
    with a departure leaves ``k`` unchanged. Arrivals at the threshold are
    refused.
    """
    if int(k) != k or not 0 <= k <= p.threshold:
        raise InvalidParams(f"k must lie in [0, {p.threshold}], got {k!r}")
    a, d = step_probabilities(p)
    dk = d[int(k)]
    p_up = a * (1.0 - dk) if k < p.threshold else 0.0
    p_down = dk * (1.0 - a) if k > 0 else 0.0
    p_stay = 1.0 - p_up - p_down
    return p_up, p_down, p_stay

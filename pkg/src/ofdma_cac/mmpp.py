"""Two-state Markov-modulated Poisson packet source.

All rates are per frame. The modulating chain has generator
``[[-q01, q01], [q10, -q10]]`` and phase ``i`` emits Poisson(lambda_i)
packets per frame per connection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams


@dataclass(frozen=True)
class MmppParams:
    q01: float
    q10: float
    lambda0: float
    lambda1: float

    def __post_init__(self):
        validate(self)

    @property
    def rates(self) -> np.ndarray:
        return np.array([self.lambda0, self.lambda1], dtype=float)


def validate(p: MmppParams) -> None:
    for name in ("q01", "q10", "lambda0", "lambda1"):
        v = getattr(p, name)
        if not math.isfinite(v) or v < 0:
            raise InvalidParams(f"{name} must be a finite nonnegative number, got {v!r}")
    if p.q01 + p.q10 <= 0:
        raise InvalidParams("q01 + q10 must be positive (modulating chain must be ergodic)")


def steady_state(p: MmppParams) -> tuple[float, float]:
    """Stationary phase probabilities ``(pi0, pi1)`` of the modulating chain."""
    validate(p)
    total = p.q01 + p.q10
    return p.q10 / total, p.q01 / total


def mean_rate(p: MmppParams) -> float:
    """Long-run packets per frame generated by one connection."""
    validate(p)
    return (p.q10 * p.lambda0 + p.q01 * p.lambda1) / (p.q01 + p.q10)


def phase_transition_matrix(p: MmppParams, t: float = 1.0) -> np.ndarray:
    """Exact transition matrix of the modulating chain over ``t`` frames.

    Uses the closed form ``P(t) = Pi + exp(-(q01+q10) t) (I - Pi)`` where
    both rows of ``Pi`` are the stationary vector.
    """
    validate(p)
    if not t >= 0:
        raise InvalidParams(f"duration must be nonnegative, got {t!r}")
    pi0, pi1 = steady_state(p)
    decay = math.exp(-(p.q01 + p.q10) * t)
    # off-diagonals written without subtraction so rows stay exact for tiny t
    p01 = pi1 * -math.expm1(-(p.q01 + p.q10) * t)
    p10 = pi0 * -math.expm1(-(p.q01 + p.q10) * t)
    return np.array(
        [[pi0 + pi1 * decay, p01],
         [p10, pi1 + pi0 * decay]],
        dtype=float,
    )

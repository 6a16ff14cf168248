"""Frame-synchronous Monte-Carlo simulation of the same system.

Randomness comes from four independent numpy ``Generator`` streams spawned
from one ``SeedSequence`` (phase, connections, arrivals, channel). Uniforms
are drawn in chunks outside the frame kernel, so the numba and numpy
backends consume identical inputs and return identical reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import kernels
from .channel import rate_pmf
from .errors import InvalidParams
from .kernels import (ACC_ARRIVED, ACC_BLOCKED, ACC_CONN, ACC_DELAY, ACC_DROPPED, ACC_FRAMES,
                      ACC_OFFERED, ACC_QUEUE, ACC_SERVED, N_ACC)
from .metrics import METRIC_NAMES
from .mmpp import phase_transition_matrix
from .traffic import per_connection_arrival_pmf, step_probabilities

STREAMS = ("phase", "connections", "arrivals", "channel")
CHUNK_FRAMES = 1 << 16


@dataclass(frozen=True)
class SimConfig:
    seed: int = 12345
    frames: int = 1_000_000
    warmup: int = 10_000
    batches: int = 20

    def __post_init__(self):
        if self.frames <= self.warmup or self.warmup < 0:
            raise InvalidParams("need frames > warmup >= 0")
        if self.batches < 2:
            raise InvalidParams("need at least two batches")
        if (self.frames - self.warmup) < self.batches:
            raise InvalidParams("fewer measured frames than batches")


@dataclass
class SimReport:
    estimates: dict
    half_widths: dict   # 99% batch-means confidence half-widths
    std_errors: dict    # batch-means standard errors
    arrived: int
    served: int
    dropped: int
    backlog: int
    offered: int
    blocked: int
    batches: np.ndarray = field(repr=False)
    mode: str = "cac"

    def conserved(self) -> bool:
        return self.served + self.dropped + self.backlog == self.arrived

    def within(self, name, value, n_sigma=3.0) -> bool:
        est, se = self.estimates[name], self.std_errors[name]
        if math.isnan(est) or math.isnan(value):
            return math.isnan(est) and math.isnan(value)
        return abs(value - est) <= n_sigma * se


def _cdf(pmf):
    c = np.cumsum(pmf)
    c[-1] = 1.0
    return c


def _batch_metrics(acc):
    """Per-batch values of the eight metrics, rows = batches."""
    frames = acc[:, ACC_FRAMES]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = {
            "p_block": np.where(acc[:, ACC_OFFERED] > 0, acc[:, ACC_BLOCKED] / acc[:, ACC_OFFERED], 0.0),
            "n_connections": acc[:, ACC_CONN] / frames,
            "n_queue": acc[:, ACC_QUEUE] / frames,
            "n_drop": acc[:, ACC_DROPPED] / frames,
            "lambda_bar": acc[:, ACC_ARRIVED] / frames,
            "p_drop": np.where(acc[:, ACC_ARRIVED] > 0, acc[:, ACC_DROPPED] / acc[:, ACC_ARRIVED], 0.0),
            "throughput": acc[:, ACC_SERVED] / frames,
            "delay": np.where(acc[:, ACC_SERVED] > 0, acc[:, ACC_DELAY] / acc[:, ACC_SERVED], np.nan),
        }
    return out


def _pooled(acc):
    tot = acc.sum(axis=0)
    frames = tot[ACC_FRAMES]
    return {
        "p_block": tot[ACC_BLOCKED] / tot[ACC_OFFERED] if tot[ACC_OFFERED] else 0.0,
        "n_connections": tot[ACC_CONN] / frames,
        "n_queue": tot[ACC_QUEUE] / frames,
        "n_drop": tot[ACC_DROPPED] / frames,
        "lambda_bar": tot[ACC_ARRIVED] / frames,
        "p_drop": tot[ACC_DROPPED] / tot[ACC_ARRIVED] if tot[ACC_ARRIVED] else 0.0,
        "throughput": tot[ACC_SERVED] / frames,
        "delay": tot[ACC_DELAY] / tot[ACC_SERVED] if tot[ACC_SERVED] else math.nan,
    }


def simulate(system, sim: SimConfig, mode=None, backend=None) -> SimReport:
    """Run one replication and return batch-means estimates of every metric."""
    mode = mode or system.mode
    conn = system.connection_params(mode)
    L = system.queue_size
    S = system.subchannels
    K = conn.threshold

    phase = phase_transition_matrix(system.mmpp, 1.0)
    phase_p0 = np.ascontiguousarray(phase[:, 0])
    a, d = step_probabilities(conn)
    per_conn = [per_connection_arrival_pmf(lam, system.max_arrivals) for lam in system.mmpp.rates]
    arr_cdf = np.vstack([_cdf(p) for p in per_conn])
    rates = rate_pmf(system.channel_model, system.amc_table)
    chan_cdf = _cdf(rates)
    chan_packets = np.array((0,) + system.amc_table.packets_per_rate, dtype=np.int64)

    seq = np.random.SeedSequence(sim.seed)
    rng = dict(zip(STREAMS, (np.random.Generator(np.random.PCG64(s)) for s in seq.spawn(len(STREAMS)))))

    batch_len = (sim.frames - sim.warmup) // sim.batches
    state = np.zeros(4, dtype=np.int64)
    tags = np.zeros(max(L, 1), dtype=np.int64)
    counters = np.zeros(5, dtype=np.int64)
    acc = np.zeros((sim.batches, N_ACC))
    arr_refill = CHUNK_FRAMES * max(K, 1)
    u_arr = np.empty(0)
    ptr = 0

    for f0 in range(0, sim.frames, CHUNK_FRAMES):
        f1 = min(f0 + CHUNK_FRAMES, sim.frames)
        n = f1 - f0
        u_phase = rng["phase"].random(n)
        u_conn = rng["connections"].random((n, 2))
        u_chan = rng["channel"].random((n, S))
        f = f0
        while f < f1:
            f, ptr = kernels.run_frames(
                f, f1, f0, state, tags, counters, acc,
                u_phase, u_conn, u_chan, u_arr, ptr,
                phase_p0, a, d, K, arr_cdf, chan_cdf, chan_packets,
                sim.warmup, batch_len, sim.batches, L,
                backend=backend,
            )
            if f < f1:
                u_arr = np.concatenate([u_arr[ptr:], rng["arrivals"].random(arr_refill)])
                ptr = 0

    per_batch = _batch_metrics(acc)
    est = _pooled(acc)
    tq = stats.t.ppf(0.995, sim.batches - 1)
    se = {}
    hw = {}
    for name in METRIC_NAMES:
        vals = per_batch[name]
        s = float(np.std(vals, ddof=1) / math.sqrt(sim.batches))
        se[name] = s
        hw[name] = tq * s
    return SimReport(
        estimates={k: float(v) for k, v in est.items()},
        half_widths=hw,
        std_errors=se,
        arrived=int(counters[kernels.CT_ARRIVED]),
        served=int(counters[kernels.CT_SERVED]),
        dropped=int(counters[kernels.CT_DROPPED]),
        backlog=int(state[kernels.ST_QUEUE]),
        offered=int(counters[kernels.CT_OFFERED]),
        blocked=int(counters[kernels.CT_BLOCKED]),
        batches=acc,
        mode=mode,
    )

"""Per-frame transmission capacity from SNR, fading and an AMC table.

Every subchannel independently picks the best rate ID whose SNR threshold
is met; rate ID ``r`` carries ``packets_per_rate[r]`` packets per frame.
Packets are 80 bits, so rate ID 0 (BPSK 1/2, 80 kbps) carries exactly one
packet per subchannel per 1 ms frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import InvalidParams

PACKET_BITS = 80

FADING_MODELS = ("deterministic", "nakagami")

# IEEE 802.16 receiver SNR thresholds (dB) for BPSK 1/2 ... 64QAM 3/4 and
# the matching packets per subchannel per frame. Reconstruction, not
# measured data: override in the config.
DEFAULT_AMC_THRESHOLDS_DB = (6.4, 9.4, 11.2, 16.4, 18.2, 22.7, 24.4)
DEFAULT_AMC_PACKETS = (1, 2, 3, 4, 6, 8, 9)


@dataclass(frozen=True)
class AmcTable:
    thresholds: tuple[float, ...]
    packets_per_rate: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(x) for x in self.thresholds))
        object.__setattr__(self, "packets_per_rate", tuple(int(x) for x in self.packets_per_rate))
        th, pk = self.thresholds, self.packets_per_rate
        if len(th) < 1:
            raise InvalidParams("AMC table needs at least one rate")
        if len(th) != len(pk):
            raise InvalidParams(
                f"AMC table has {len(th)} thresholds but {len(pk)} packet counts"
            )
        if not all(math.isfinite(x) for x in th):
            raise InvalidParams("AMC thresholds must be finite")
        if any(b <= a for a, b in zip(th, th[1:])):
            raise InvalidParams("AMC thresholds must be strictly increasing")
        if any(x < 0 for x in pk):
            raise InvalidParams("AMC packet counts must be nonnegative")
        if any(b < a for a, b in zip(pk, pk[1:])):
            raise InvalidParams("AMC packet counts must be nondecreasing")

    @property
    def n_rates(self) -> int:
        return len(self.thresholds)


@dataclass(frozen=True)
class ChannelModel:
    mean_snr: float
    fading: str = "nakagami"
    m: float = 1.0
    subchannels: int = 1

    def __post_init__(self):
        if not math.isfinite(self.mean_snr):
            raise InvalidParams("mean SNR must be finite")
        if self.fading not in FADING_MODELS:
            raise InvalidParams(f"fading must be one of {FADING_MODELS}, got {self.fading!r}")
        if self.fading == "nakagami" and not (self.m >= 0.5 and math.isfinite(self.m)):
            raise InvalidParams(f"Nakagami shape m must be >= 0.5, got {self.m!r}")
        if int(self.subchannels) != self.subchannels or self.subchannels < 0:
            raise InvalidParams(f"subchannel count must be a nonnegative integer, got {self.subchannels!r}")


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def rate_pmf(model: ChannelModel, table: AmcTable) -> np.ndarray:
    """Probability of each rate outcome on one subchannel.

    Index 0 is "no transmission" (SNR below every threshold); index
    ``r + 1`` is rate ID ``r``.
    """
    R = table.n_rates
    out = np.zeros(R + 1)
    if model.fading == "deterministic":
        best = np.searchsorted(np.asarray(table.thresholds), model.mean_snr, side="right") - 1
        out[best + 1] = 1.0
        return out
    m = float(model.m)
    x = m * db_to_linear(table.thresholds) / db_to_linear(model.mean_snr)
    # regularized upper incomplete gamma: Pr[SNR >= threshold]
    tail = np.append(special.gammaincc(m, x), 0.0)
    out[1:] = tail[:-1] - tail[1:]
    out[0] = special.gammainc(m, x[0])
    return out


def subchannel_packet_pmf(rates: np.ndarray, table: AmcTable) -> np.ndarray:
    """Map a rate-outcome pmf to a pmf over packets carried by one subchannel."""
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (table.n_rates + 1,):
        raise InvalidParams("rate pmf length does not match the AMC table")
    pk = np.array((0,) + table.packets_per_rate)
    out = np.zeros(pk.max() + 1)
    np.add.at(out, pk, rates)
    return out


def transmission_pmf(rates: np.ndarray, table: AmcTable, subchannels: int) -> np.ndarray:
    """Pmf of packets transmittable per frame over ``subchannels`` i.i.d. subchannels."""
    if int(subchannels) != subchannels or subchannels < 0:
        raise InvalidParams(f"subchannel count must be a nonnegative integer, got {subchannels!r}")
    single = subchannel_packet_pmf(rates, table)
    return convolve_power(single, int(subchannels))


def convolve_power(pmf: np.ndarray, n: int) -> np.ndarray:
    """``n``-fold self-convolution of a pmf (unit mass at 0 for ``n == 0``)."""
    out = np.ones(1)
    for _ in range(n):
        out = np.convolve(out, pmf)
    return out

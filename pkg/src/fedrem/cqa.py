"""Channel quality assessment: capacity, outage threshold, channel choice.

At low SNR the capacity of a channel falls below ``c_th`` exactly when the
aggregated interference statistic ``chi`` falls below

    t = ln( ln2 * c_th * Nf / (B * P_tx * H) )

so the outage probability of a channel is the mixture CDF at ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive
from .gmm import GmmParams, cdf
from .interference import ChannelConfig

__all__ = [
    "LinkBudget",
    "NoiseModel",
    "capacity",
    "outage_threshold",
    "outage_probability",
    "empirical_outage",
    "select_channel",
    "argmin_channel",
]


@dataclass(frozen=True)
class LinkBudget:
    p_tx_per_subcarrier: float
    channel_gain_H: float
    c_th: float
    channel: ChannelConfig

    def __post_init__(self):
        check_positive(self.p_tx_per_subcarrier, "p_tx_per_subcarrier")
        check_positive(self.channel_gain_H, "channel_gain_H")
        check_positive(self.c_th, "c_th")

    @property
    def received_power(self) -> float:
        return self.p_tx_per_subcarrier * self.channel_gain_H


@dataclass(frozen=True)
class NoiseModel:
    sigma_n_sq: float

    def __post_init__(self):
        check_positive(self.sigma_n_sq, "sigma_n_sq")


def capacity(link: LinkBudget, noise: NoiseModel, interference_per_subchannel) -> float:
    """Shannon capacity in bit/s summed over the usable sub-channels.

    ``interference_per_subchannel`` has one value per usable sub-channel,
    or trailing axis of that length for a batch of evaluations.
    """
    interf = np.asarray(interference_per_subchannel, dtype=np.float64)
    if np.any(interf < 0):
        raise ValueError("interference power must be non-negative")
    if interf.shape[-1] != link.channel.n_usable:
        raise ValueError(f"expected {link.channel.n_usable} sub-channel values, got {interf.shape[-1]}")
    sinr = link.received_power / (noise.sigma_n_sq + interf)
    c = link.channel.subcarrier_spacing * np.sum(np.log2(1.0 + sinr), axis=-1)
    return float(c) if c.ndim == 0 else c


def outage_threshold(link: LinkBudget) -> float:
    ch = link.channel
    return math.log(math.log(2.0) * link.c_th * ch.n_subchannels_Nf / (ch.bandwidth_B * link.received_power))


def outage_probability(model: GmmParams, t: float) -> float:
    """``P(chi < t)`` under the mixture."""
    return cdf(model, t)


def empirical_outage(chi, t: float) -> float:
    """Fraction of samples strictly below ``t``."""
    x = np.asarray(getattr(chi, "chi_samples", chi), dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty chi batch")
    return float(np.count_nonzero(x < t)) / x.size


def argmin_channel(outages, resolution: float = 0.0) -> int:
    """Index of the smallest outage; ties go to the lowest index.

    Outages below ``resolution`` count as equal, so channels that are all
    effectively clean resolve to the lowest index instead of to mixture
    tail noise.
    """
    if resolution < 0:
        raise ValueError("resolution must be non-negative")
    outages = np.maximum(np.asarray(outages, dtype=np.float64), resolution)
    return int(np.flatnonzero(outages == outages.min())[0])


def select_channel(rem, location: int, links, resolution: float = 0.0) -> int:
    """Channel with the lowest outage probability at ``location``.

    ``links`` is a sequence (indexed by channel) of :class:`LinkBudget`, or
    of precomputed thresholds.  See :func:`argmin_channel` for ``resolution``.
    """
    outages = []
    for ch, link in enumerate(links):
        entry = rem.get(location, ch)
        if entry is None:
            raise KeyError(f"no REM entry for location {location}, channel {ch}")
        t = outage_threshold(link) if isinstance(link, LinkBudget) else float(link)
        outages.append(outage_probability(entry.model, t))
    return argmin_channel(outages, resolution)

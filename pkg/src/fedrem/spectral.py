"""From IQ captures to samples of the aggregated interference statistic.

Each capture is cut into non-overlapping segments of ``Nf`` samples.  A
rectangular-window DFT per segment gives the power in every sub-channel,
normalized as ``|DFT|^2 / Nf^2`` so that a row sums to the mean sample power
of its segment: white noise of per-sample power ``P`` shows ``P / Nf`` in
every bin, a constant ``a`` puts ``|a|^2`` in the DC bin.  The statistic is

    chi = ln( sum_{f in F} 1 / P_f )

over the usable sub-channels ``F``; the measured ``P_f`` already contains
the noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.fft
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_positive_int
from .interference import ChannelConfig, IqBatch

__all__ = [
    "ChiBatch",
    "segment_power_grid",
    "aggregate_chi",
    "chi_from_iq",
    "ChiTransformer",
    "write_power_grid_csv",
    "write_chi_csv",
]


@dataclass(frozen=True)
class ChiBatch:
    chi_samples: np.ndarray
    location_index: int = -1
    channel_index: int = -1

    def __post_init__(self):
        chi = np.asarray(self.chi_samples, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(chi)):
            raise ValueError("chi samples must be finite")
        chi.flags.writeable = False
        object.__setattr__(self, "chi_samples", chi)

    def __len__(self):
        return self.chi_samples.size

    @property
    def n_s(self) -> int:
        return self.chi_samples.size


def segment_power_grid(iq, n_subchannels) -> np.ndarray:
    """``(N_s, Nf)`` matrix of per-sub-channel powers in watts.

    ``n_subchannels`` is an int or a :class:`ChannelConfig`.
    """
    if isinstance(n_subchannels, ChannelConfig):
        n_subchannels = n_subchannels.n_subchannels_Nf
    nf = check_positive_int(n_subchannels, "n_subchannels")
    samples = np.asarray(getattr(iq, "samples", iq)).reshape(-1)
    if samples.size == 0 or samples.size % nf:
        raise ValueError(f"{samples.size} samples cannot be split into segments of {nf}")
    spec = scipy.fft.fft(samples.reshape(-1, nf), axis=1)
    return (spec.real**2 + spec.imag**2) / float(nf * nf)


def aggregate_chi(power_grid, usable_set_F, location_index: int = -1, channel_index: int = -1) -> ChiBatch:
    """Per segment, ``ln sum_{f in F} 1 / P_f``."""
    grid = np.asarray(power_grid, dtype=np.float64)
    if grid.ndim == 1:
        grid = grid[None, :]
    cols = np.asarray(list(usable_set_F), dtype=np.intp)
    if cols.size == 0:
        raise ValueError("usable sub-channel set is empty")
    usable = grid[:, cols]
    if not np.all(usable > 0) or not np.all(np.isfinite(usable)):
        raise ValueError("sub-channel powers must be positive and finite")
    chi = np.log(np.sum(1.0 / usable, axis=1))
    return ChiBatch(chi, location_index, channel_index)


def chi_from_iq(iq: IqBatch, channel: ChannelConfig) -> ChiBatch:
    grid = segment_power_grid(iq, channel.n_subchannels_Nf)
    return aggregate_chi(grid, channel.usable_subchannels_F, iq.location_index, iq.channel_index)


class ChiTransformer(TransformerMixin, BaseEstimator):
    """Stateless transformer: IQ captures (one per row) to chi samples.

    ``transform`` takes an array of shape ``(n_captures, M)`` and returns
    ``(n_captures, M // n_subchannels)``.
    """

    def __init__(self, n_subchannels=64, usable_subchannels=None):
        self.n_subchannels = n_subchannels
        self.usable_subchannels = usable_subchannels

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        X = np.atleast_2d(np.asarray(X))
        usable = self.usable_subchannels
        if usable is None:
            usable = ChannelConfig(1.0, n_subchannels_Nf=self.n_subchannels).usable_subchannels_F
        return np.stack(
            [aggregate_chi(segment_power_grid(row, self.n_subchannels), usable).chi_samples for row in X]
        )


def write_power_grid_csv(path, grid) -> None:
    """One row per segment, one column per sub-channel."""
    grid = np.asarray(grid)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["segment"] + [f"p{f}" for f in range(grid.shape[1])])
        for r, row in enumerate(grid):
            w.writerow([r] + [repr(float(v)) for v in row])


def write_chi_csv(path, batches) -> None:
    """Rows ``location,channel,segment,chi`` for one or more batches."""
    if isinstance(batches, ChiBatch):
        batches = [batches]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["location", "channel", "segment", "chi"])
        for b in batches:
            for r, v in enumerate(b.chi_samples):
                w.writerow([b.location_index, b.channel_index, r, repr(float(v))])

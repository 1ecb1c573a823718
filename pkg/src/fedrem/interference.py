"""Synthetic interference-plus-noise captures at platoon locations.

Access points alternate between exponentially distributed idle periods and
fixed-length busy bursts.  While busy, an access point radiates a unit-power
complex Gaussian waveform over its whole channel, attenuated by a two-slope
path-loss law and a per-segment Rayleigh tapped-delay-line channel.  Thermal
noise is added at the receiver.

Time is measured in milliseconds throughout this module, power in watts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
import scipy.fft
from scipy.constants import Boltzmann, speed_of_light

from ._validation import as_generator, check_positive, check_positive_int

if TYPE_CHECKING:
    from .scenario import ScenarioConfig

__all__ = [
    "TrafficModel",
    "AccessPoint",
    "ChannelConfig",
    "IqBatch",
    "generate_occupancy_trace",
    "occupancy_mask",
    "path_loss_gain",
    "breakpoint_distance",
    "exponential_pdp",
    "small_scale_gain",
    "thermal_noise_power",
    "synthesize_iq_batch",
    "synthesize_power_grid",
]


@dataclass(frozen=True)
class TrafficModel:
    """Two-state renewal traffic: Exp(rate) idle gaps, fixed busy bursts."""

    idle_rate_lambda: float = 0.0054  # 1/ms
    busy_duration: float = 0.81  # ms

    def __post_init__(self):
        check_positive(self.idle_rate_lambda, "idle_rate_lambda")
        check_positive(self.busy_duration, "busy_duration")

    @property
    def busy_fraction(self) -> float:
        """Long-run fraction of time spent busy (renewal-reward)."""
        return self.busy_duration / (self.busy_duration + 1.0 / self.idle_rate_lambda)


@dataclass(frozen=True)
class AccessPoint:
    position: tuple[float, float]
    channel_index: int
    traffic: TrafficModel = field(default_factory=TrafficModel)
    tx_power: float = 0.1  # W, total over the channel (20 dBm)

    def __post_init__(self):
        if self.channel_index < 0:
            raise ValueError(f"channel_index must be >= 0, got {self.channel_index}")
        check_positive(self.tx_power, "tx_power")
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))


@dataclass(frozen=True)
class ChannelConfig:
    """One secondary channel split into ``n_subchannels`` DFT bins.

    ``usable_subchannels`` are bin indices in FFT order (0 is DC).
    """

    center_freq: float
    bandwidth_B: float = 10e6
    n_subchannels_Nf: int = 64
    usable_subchannels_F: tuple[int, ...] = tuple(range(1, 25)) + tuple(range(40, 64))

    def __post_init__(self):
        check_positive(self.center_freq, "center_freq")
        check_positive(self.bandwidth_B, "bandwidth_B")
        check_positive_int(self.n_subchannels_Nf, "n_subchannels_Nf")
        usable = tuple(int(f) for f in self.usable_subchannels_F)
        if not usable:
            raise ValueError("usable_subchannels_F must not be empty")
        if len(set(usable)) != len(usable):
            raise ValueError("usable_subchannels_F contains duplicates")
        if min(usable) < 0 or max(usable) >= self.n_subchannels_Nf:
            raise ValueError("usable_subchannels_F indices out of range")
        object.__setattr__(self, "usable_subchannels_F", usable)

    @property
    def subcarrier_spacing(self) -> float:
        return self.bandwidth_B / self.n_subchannels_Nf

    @property
    def n_usable(self) -> int:
        return len(self.usable_subchannels_F)


@dataclass(frozen=True)
class IqBatch:
    samples: np.ndarray
    location_index: int
    channel_index: int

    @property
    def power(self) -> np.ndarray:
        return self.samples.real**2 + self.samples.imag**2


def generate_occupancy_trace(traffic: TrafficModel, duration: float, rng_seed=None):
    """Busy intervals ``[(start, end), ...]`` of one access point over ``[0, duration)`` ms.

    The process starts idle at ``t = 0``.  Every burst that starts before
    ``duration`` is reported with its full length, so the last interval may
    extend past ``duration``.
    """
    duration = check_positive(duration, "duration")
    rng = as_generator(rng_seed)
    mean_cycle = 1.0 / traffic.idle_rate_lambda + traffic.busy_duration
    starts = []
    t = 0.0
    while True:
        # draw idle gaps in blocks; one block usually covers the whole duration
        n = int((duration - t) / mean_cycle * 1.2) + 8
        gaps = rng.exponential(1.0 / traffic.idle_rate_lambda, size=n)
        cycle_starts = t + np.cumsum(gaps) + traffic.busy_duration * np.arange(n)
        inside = cycle_starts < duration
        starts.extend(cycle_starts[inside].tolist())
        if not inside[-1]:
            break
        t = cycle_starts[-1] + traffic.busy_duration
    return [(s, s + traffic.busy_duration) for s in starts]


def occupancy_mask(intervals, times: np.ndarray) -> np.ndarray:
    """Boolean array, True where ``times`` fall inside a busy interval."""
    times = np.asarray(times, dtype=float)
    if not intervals:
        return np.zeros(times.shape, dtype=bool)
    starts = np.fromiter((s for s, _ in intervals), float, len(intervals))
    ends = np.fromiter((e for _, e in intervals), float, len(intervals))
    idx = np.searchsorted(starts, times, side="right") - 1
    valid = idx >= 0
    mask = np.zeros(times.shape, dtype=bool)
    mask[valid] = times[valid] < ends[idx[valid]]
    return mask


def breakpoint_distance(center_freq: float, h_tx: float = 1.5, h_rx: float = 1.5) -> float:
    return 4.0 * h_tx * h_rx * center_freq / speed_of_light


def path_loss_gain(
    distance,
    center_freq: float,
    h_tx: float = 1.5,
    h_rx: float = 1.5,
    near_exponent: float = 2.0,
    far_exponent: float = 4.0,
):
    """Two-slope large-scale power gain (linear, capped at 1).

    Friis attenuation ``(c / 4 pi f)^2`` at 1 m, decaying with
    ``near_exponent`` up to the breakpoint ``4 h_tx h_rx f / c`` and with
    ``far_exponent`` beyond it.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(~np.isfinite(d)) or np.any(d <= 0):
        raise ValueError("distance must be positive")
    check_positive(center_freq, "center_freq")
    d_bp = breakpoint_distance(center_freq, h_tx, h_rx)
    g1 = (speed_of_light / (4.0 * np.pi * center_freq)) ** 2
    g_bp = g1 * d_bp ** (-near_exponent)
    gain = np.where(
        d <= d_bp,
        g1 * d ** (-near_exponent),
        g_bp * (d / d_bp) ** (-far_exponent),
    )
    gain = np.minimum(gain, 1.0)
    return float(gain) if gain.ndim == 0 else gain


def exponential_pdp(n_taps: int = 4, decay_db: float = 3.0) -> np.ndarray:
    """Tap powers decaying by ``decay_db`` per tap, normalized to sum to 1."""
    check_positive_int(n_taps, "n_taps")
    p = 10.0 ** (-decay_db * np.arange(n_taps) / 10.0)
    return p / p.sum()


def small_scale_gain(pdp_powers, n_subcarriers: int = 64, rng_seed=None, size=None):
    """Per-subcarrier complex gains of a Rayleigh tapped delay line.

    Each tap is circular complex Gaussian with variance equal to its PDP
    power (taps spaced one sample apart); the frequency response is the
    ``n_subcarriers``-point DFT of the taps.  Returns shape
    ``(n_subcarriers,)`` or ``(size, n_subcarriers)``.
    """
    pdp = np.asarray(pdp_powers, dtype=float)
    if pdp.ndim != 1 or pdp.size == 0:
        raise ValueError("pdp_powers must be a non-empty vector")
    if np.any(pdp < 0) or not np.isclose(pdp.sum(), 1.0, rtol=1e-9, atol=0):
        raise ValueError("pdp_powers must be non-negative and sum to 1")
    if pdp.size > n_subcarriers:
        raise ValueError("more taps than subcarriers")
    rng = as_generator(rng_seed)
    shape = (pdp.size,) if size is None else (size, pdp.size)
    taps = _complex_normal(rng, shape) * np.sqrt(pdp)
    return scipy.fft.fft(taps, n=n_subcarriers, axis=-1)


def thermal_noise_power(temperature: float, bandwidth: float) -> float:
    """Johnson-Nyquist noise power ``k_B T bandwidth`` in watts."""
    check_positive(temperature, "temperature")
    check_positive(bandwidth, "bandwidth")
    return Boltzmann * temperature * bandwidth


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-power circular complex Gaussian samples."""
    z = rng.standard_normal(tuple(np.atleast_1d(shape)) + (2,))
    z *= np.sqrt(0.5)
    return z.view(np.complex128)[..., 0]


def _child_generators(seed, n: int) -> list[np.random.Generator]:
    if isinstance(seed, np.random.Generator):
        return seed.spawn(n)
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in seed.spawn(n)]


def _check_indices(scenario: "ScenarioConfig", location_index: int, channel_index: int):
    if not 0 <= location_index < len(scenario.locations):
        raise KeyError(f"location {location_index} not in scenario")
    if not 0 <= channel_index < len(scenario.channels):
        raise KeyError(f"channel {channel_index} not in scenario")


def _busy_contributions(scenario, location_index, channel_index, n_segments, rngs):
    """Yield ``(segment_rows, faded_waveform)`` for every AP on the channel.

    ``faded_waveform`` holds time-domain samples of shape ``(len(rows), Nf)``
    already masked by the occupancy of each sample.
    """
    ch = scenario.channels[channel_index]
    nf = ch.n_subchannels_Nf
    radio = scenario.radio
    sample_ms = 1e3 / ch.bandwidth_B
    period = scenario.capture.segment_period_ms or nf * sample_ms
    if period < nf * sample_ms * (1 - 1e-12):
        raise ValueError(f"segment period {period} ms is shorter than a segment ({nf * sample_ms} ms)")
    duration = n_segments * period + nf * sample_ms
    loc = np.asarray(scenario.locations[location_index], dtype=float)
    offsets = np.arange(nf) * sample_ms
    aps = scenario.access_points_on(channel_index)
    for ap, rng in zip(aps, rngs):
        trace = generate_occupancy_trace(ap.traffic, duration, rng)
        if not trace:
            continue
        # only segments overlapping a burst need a waveform
        starts = np.array([s for s, _ in trace])
        ends = np.array([e for _, e in trace])
        seg_start = np.arange(n_segments) * period
        seg_end = seg_start + offsets[-1]
        first = np.searchsorted(ends, seg_start, side="right")
        hit = (first < len(starts)) & (starts[np.minimum(first, len(starts) - 1)] <= seg_end)
        rows = np.flatnonzero(hit)
        if rows.size == 0:
            continue
        mask = occupancy_mask(trace, seg_start[rows, None] + offsets[None, :])
        distance = max(float(np.hypot(*(np.asarray(ap.position) - loc))), 1e-3)
        gain = path_loss_gain(
            distance,
            ch.center_freq,
            radio.h_tx,
            radio.h_rx,
            radio.near_exponent,
            radio.far_exponent,
        )
        w = _complex_normal(rng, (rows.size, nf))
        h = small_scale_gain(radio.pdp_powers, nf, rng, size=rows.size)
        faded = scipy.fft.ifft(scipy.fft.fft(w, axis=1) * h, axis=1)
        yield rows, faded * np.sqrt(ap.tx_power * gain) * mask


def synthesize_iq_batch(
    scenario: "ScenarioConfig", location_index: int, channel_index: int, M: int, rng_seed=None
) -> IqBatch:
    """Capture ``M`` IQ samples on one channel at one platoon location.

    The capture consists of ``M / Nf`` segments of ``Nf`` consecutive samples
    at rate ``B``; segment starts are ``segment_period_ms`` apart, or
    contiguous when that is ``None``.
    Noise has per-sample power ``k_B T B``.
    """
    _check_indices(scenario, location_index, channel_index)
    ch = scenario.channels[channel_index]
    nf = ch.n_subchannels_Nf
    check_positive_int(M, "M")
    if M % nf:
        raise ValueError(f"M={M} is not divisible by Nf={nf}")
    n_segments = M // nf
    n_aps = len(scenario.access_points_on(channel_index))
    noise_rng, *ap_rngs = _child_generators(rng_seed, n_aps + 1)

    noise_power = thermal_noise_power(scenario.radio.temperature_k, ch.bandwidth_B)
    iq = _complex_normal(noise_rng, (n_segments, nf)) * np.sqrt(noise_power)
    for rows, contrib in _busy_contributions(
        scenario, location_index, channel_index, n_segments, ap_rngs
    ):
        iq[rows] += contrib
    return IqBatch(iq.reshape(-1), location_index, channel_index)


def synthesize_power_grid(
    scenario: "ScenarioConfig",
    location_index: int,
    channel_index: int,
    n_segments: int,
    rng_seed=None,
) -> np.ndarray:
    """Per-sub-channel power grid with the same law as the IQ route.

    Equivalent in distribution to
    ``segment_power_grid(synthesize_iq_batch(...))``, but skips the noise-only
    segments' time-domain samples: the DFT of white circular Gaussian noise
    is white, so those bins are drawn directly as ``k_B T B / Nf * Exp(1)``.
    Segments touched by a burst go through the full time-domain path.
    """
    _check_indices(scenario, location_index, channel_index)
    n_segments = check_positive_int(n_segments, "n_segments")
    ch = scenario.channels[channel_index]
    nf = ch.n_subchannels_Nf
    n_aps = len(scenario.access_points_on(channel_index))
    noise_rng, *ap_rngs = _child_generators(rng_seed, n_aps + 1)
    noise_power = thermal_noise_power(scenario.radio.temperature_k, ch.bandwidth_B)

    busy = {}
    for rows, contrib in _busy_contributions(
        scenario, location_index, channel_index, n_segments, ap_rngs
    ):
        for r, c in zip(rows.tolist(), contrib):
            busy[r] = busy[r] + c if r in busy else c

    grid = noise_rng.standard_exponential((n_segments, nf))
    grid *= noise_power / nf
    if busy:
        rows = np.fromiter(busy, int, len(busy))
        seg = np.stack([busy[r] for r in rows.tolist()])
        seg += _complex_normal(noise_rng, seg.shape) * np.sqrt(noise_power)
        dft = scipy.fft.fft(seg, axis=1)
        grid[rows] = (dft.real**2 + dft.imag**2) / nf**2
    return grid

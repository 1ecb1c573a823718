"""Scenario configuration: geometry of the route and radio defaults.

A scenario is a JSON document.  Every key is optional; missing keys fall
back to the defaults below and :func:`load_scenario` accepts a nested
``overrides`` mapping applied on top of the file.  Layout::

    {
      "route": {"length_m": 1000, "n_locations": 30},
      "channels": [{"center_freq": 2.412e9, "bandwidth_B": 1e7,
                    "n_subchannels_Nf": 64, "usable_subchannels_F": [...]}, ...],
      "access_points": [{"position": [x, y], "channel_index": 0,
                         "tx_power_dbm": 36, "idle_rate_lambda": 0.0054,
                         "busy_duration": 0.81}, ...],
      "radio": {"temperature_k": 293.15, "h_tx": 1.5, "h_rx": 1.5,
                "near_exponent": 2, "far_exponent": 4, "pdp_powers": [...]},
      "link": {"p_tx_dbm": 3.19, "distance_m": 50, "antenna_gain_db": 0,
               "c_th_bps": 3e6},
      "capture": {"n_s": 4096, "segment_period_ms": 1.0},
      "learning": {"k": 5},
      "experiment": {"platoons_U": 1, "laps_R": 15, "seeds": 20,
                     "n_components_J": 7, "baseline_samples": 614400,
                     "outage_resolution": 1e-4},
      "em": {"tol": 1e-6, "max_iter": 200, "n_init": 3}
    }
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.constants import speed_of_light

from ._validation import check_positive, check_positive_int
from .cqa import LinkBudget, NoiseModel
from .federated import LearningConfig
from .interference import (
    AccessPoint,
    ChannelConfig,
    TrafficModel,
    exponential_pdp,
    thermal_noise_power,
)

__all__ = [
    "RadioConfig",
    "LinkConfig",
    "CaptureConfig",
    "EmOptions",
    "ScenarioConfig",
    "default_scenario",
    "load_scenario",
    "scenario_from_dict",
    "scatter_access_points",
    "dbm_to_watts",
]

DEFAULT_SCENARIO_FILE = "default_scenario.json"


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1e3


def watts_to_dbm(watts: float) -> float:
    return 10.0 * np.log10(watts * 1e3)


@dataclass(frozen=True)
class RadioConfig:
    temperature_k: float = 293.15
    h_tx: float = 1.5
    h_rx: float = 1.5
    near_exponent: float = 2.0
    far_exponent: float = 4.0
    pdp_powers: tuple[float, ...] = tuple(exponential_pdp(4, 3.0).tolist())


@dataclass(frozen=True)
class LinkConfig:
    """Leader-to-last-vehicle link; ``p_tx_dbm`` is per sub-carrier."""

    p_tx_dbm: float = 3.19
    distance_m: float = 50.0
    antenna_gain_db: float = 0.0
    c_th_bps: float = 3e6


@dataclass(frozen=True)
class CaptureConfig:
    """``n_s`` segments per capture.

    Segment start times are ``segment_period_ms`` apart, so one capture
    samples the traffic over ``n_s`` periods and bursts hit segments almost
    independently.  ``None`` packs segments back to back.
    """

    n_s: int = 4096
    segment_period_ms: float | None = 1.0

    def __post_init__(self):
        check_positive_int(self.n_s, "n_s")
        if self.segment_period_ms is not None:
            check_positive(self.segment_period_ms, "segment_period_ms")


@dataclass(frozen=True)
class EmOptions:
    tol: float = 1e-6
    max_iter: int = 200
    n_init: int = 3


@dataclass(frozen=True)
class ScenarioConfig:
    locations: tuple[tuple[float, float], ...]
    access_points: tuple[AccessPoint, ...]
    channels: tuple[ChannelConfig, ...]
    radio: RadioConfig = field(default_factory=RadioConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    capture: CaptureConfig = field(default_factory=CaptureConfig)
    k: int = 5
    platoons_U: int = 1
    laps_R: int = 15
    seeds: tuple[int, ...] = tuple(range(20))
    n_components_J: int = 7
    baseline_samples: int = 614_400
    outage_resolution: float = 1e-4
    em: EmOptions = field(default_factory=EmOptions)

    def __post_init__(self):
        if not self.locations:
            raise ValueError("scenario needs at least one location")
        if not self.channels:
            raise ValueError("scenario needs at least one channel")
        freqs = [c.center_freq for c in self.channels]
        if len(set(freqs)) != len(freqs):
            raise ValueError("channel center frequencies must be distinct")
        for ap in self.access_points:
            if ap.channel_index >= len(self.channels):
                raise ValueError(f"access point on unknown channel {ap.channel_index}")
        check_positive_int(self.k, "k")
        check_positive_int(self.platoons_U, "platoons_U")
        check_positive_int(self.laps_R, "laps_R")
        check_positive_int(self.n_components_J, "n_components_J")
        if not self.seeds:
            raise ValueError("seeds must not be empty")
        if not 0 <= self.outage_resolution < 1:
            raise ValueError("outage_resolution must lie in [0, 1)")

    @property
    def n_locations(self) -> int:
        return len(self.locations)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def capture_M(self) -> int:
        """IQ samples per capture on the first channel."""
        return self.capture.n_s * self.channels[0].n_subchannels_Nf

    @property
    def learning(self) -> LearningConfig:
        return LearningConfig(k=self.k, n_s=self.capture.n_s)

    def access_points_on(self, channel_index: int) -> tuple[AccessPoint, ...]:
        return tuple(ap for ap in self.access_points if ap.channel_index == channel_index)

    def link_budget(self, channel_index: int) -> LinkBudget:
        """Free-space leader-to-tail link at the channel's center frequency."""
        ch = self.channels[channel_index]
        wavelength = speed_of_light / ch.center_freq
        h = (wavelength / (4 * np.pi * self.link.distance_m)) ** 2
        h *= 10 ** (self.link.antenna_gain_db / 10)
        return LinkBudget(
            p_tx_per_subcarrier=dbm_to_watts(self.link.p_tx_dbm),
            channel_gain_H=h,
            c_th=self.link.c_th_bps,
            channel=ch,
        )

    def noise_model(self, channel_index: int) -> NoiseModel:
        ch = self.channels[channel_index]
        return NoiseModel(thermal_noise_power(self.radio.temperature_k, ch.subcarrier_spacing))

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        xs = [x for x, _ in self.locations]
        return {
            "locations": [list(p) for p in self.locations],
            "route": {"length_m": max(xs) - min(xs), "n_locations": len(xs)},
            "channels": [
                {
                    "center_freq": c.center_freq,
                    "bandwidth_B": c.bandwidth_B,
                    "n_subchannels_Nf": c.n_subchannels_Nf,
                    "usable_subchannels_F": list(c.usable_subchannels_F),
                }
                for c in self.channels
            ],
            "access_points": [
                {
                    "position": list(ap.position),
                    "channel_index": ap.channel_index,
                    "tx_power_dbm": round(watts_to_dbm(ap.tx_power), 12),
                    "idle_rate_lambda": ap.traffic.idle_rate_lambda,
                    "busy_duration": ap.traffic.busy_duration,
                }
                for ap in self.access_points
            ],
            "radio": {**asdict(self.radio), "pdp_powers": list(self.radio.pdp_powers)},
            "link": asdict(self.link),
            "capture": asdict(self.capture),
            "learning": {"k": self.k},
            "experiment": {
                "platoons_U": self.platoons_U,
                "laps_R": self.laps_R,
                "seeds": list(self.seeds),
                "n_components_J": self.n_components_J,
                "baseline_samples": self.baseline_samples,
                "outage_resolution": self.outage_resolution,
            },
            "em": asdict(self.em),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def route_locations(length_m: float = 1000.0, n_locations: int = 30):
    """Midpoints of ``n_locations`` equal segments of a straight route on the x axis."""
    step = length_m / n_locations
    return tuple(((i + 0.5) * step, 0.0) for i in range(n_locations))


def scatter_access_points(
    seed: int,
    per_channel=(4, 4, 3),
    route_length: float = 1000.0,
    max_offset: float = 50.0,
    tx_power_dbm: float = 36.0,
    traffic: TrafficModel | None = None,
) -> tuple[AccessPoint, ...]:
    """Uniformly scatter access points within ``max_offset`` of the route."""
    rng = np.random.default_rng(seed)
    traffic = traffic or TrafficModel()
    aps = []
    for ch, count in enumerate(per_channel):
        for _ in range(count):
            x = rng.uniform(0.0, route_length)
            y = rng.uniform(-max_offset, max_offset)
            aps.append(AccessPoint((round(x, 3), round(y, 3)), ch, traffic, dbm_to_watts(tx_power_dbm)))
    return tuple(aps)


def _merge(base: dict, overrides: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    """Build a scenario from a (possibly partial) JSON-style mapping."""
    doc = _merge(_default_document(), doc)
    if "locations" in doc and doc["locations"]:
        locations = tuple((float(x), float(y)) for x, y in doc["locations"])
    else:
        route = doc.get("route", {})
        locations = route_locations(route.get("length_m", 1000.0), route.get("n_locations", 30))
    channels = tuple(
        ChannelConfig(
            center_freq=c["center_freq"],
            bandwidth_B=c.get("bandwidth_B", 10e6),
            n_subchannels_Nf=c.get("n_subchannels_Nf", 64),
            usable_subchannels_F=tuple(
                c.get("usable_subchannels_F", ChannelConfig.__dataclass_fields__["usable_subchannels_F"].default)
            ),
        )
        for c in doc["channels"]
    )
    aps = tuple(
        AccessPoint(
            position=tuple(a["position"]),
            channel_index=a["channel_index"],
            traffic=TrafficModel(a.get("idle_rate_lambda", 0.0054), a.get("busy_duration", 0.81)),
            tx_power=dbm_to_watts(a.get("tx_power_dbm", 20.0)),
        )
        for a in doc["access_points"]
    )
    radio = doc.get("radio", {})
    radio = RadioConfig(**{**radio, "pdp_powers": tuple(radio.get("pdp_powers", RadioConfig.pdp_powers))})
    exp = doc.get("experiment", {})
    seeds = exp.get("seeds", 20)
    seeds = tuple(range(seeds)) if isinstance(seeds, int) else tuple(int(s) for s in seeds)
    return ScenarioConfig(
        locations=locations,
        access_points=aps,
        channels=channels,
        radio=radio,
        link=LinkConfig(**doc.get("link", {})),
        capture=CaptureConfig(**doc.get("capture", {})),
        k=doc.get("learning", {}).get("k", 5),
        platoons_U=exp.get("platoons_U", 1),
        laps_R=exp.get("laps_R", 15),
        seeds=seeds,
        n_components_J=exp.get("n_components_J", 7),
        baseline_samples=exp.get("baseline_samples", 614_400),
        outage_resolution=exp.get("outage_resolution", 1e-4),
        em=EmOptions(**doc.get("em", {})),
    )


def _default_document() -> dict:
    text = resources.files("fedrem.data").joinpath(DEFAULT_SCENARIO_FILE).read_text()
    return json.loads(text)


def default_scenario(**overrides) -> ScenarioConfig:
    """The packaged default scenario, optionally with nested key overrides."""
    return scenario_from_dict(overrides)


def load_scenario(path=None, overrides: dict | None = None) -> ScenarioConfig:
    """Load a scenario JSON file (defaults fill missing keys)."""
    doc = {}
    if path is not None:
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid scenario JSON at line {exc.lineno} column {exc.colno}") from exc
    if overrides:
        doc = _merge(doc, overrides)
    return scenario_from_dict(doc)

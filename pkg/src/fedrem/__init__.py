"""Federated radio-environment-map interference modeling for vehicular spectrum access."""

from .cqa import LinkBudget, NoiseModel, capacity, empirical_outage, outage_probability, outage_threshold, select_channel
from .federated import LearningConfig, fed_avg_merge, local_update, n_th
from .gmm import GmmParams, SharedVarianceGMM, aic, cdf, fit_em, log_likelihood, sample, select_j, sort_components
from .interference import (
    AccessPoint,
    ChannelConfig,
    IqBatch,
    TrafficModel,
    generate_occupancy_trace,
    path_loss_gain,
    small_scale_gain,
    synthesize_iq_batch,
    synthesize_power_grid,
    thermal_noise_power,
)
from .rem import RemEntry, RemStore
from .scenario import ScenarioConfig, default_scenario, load_scenario
from .spectral import ChiBatch, ChiTransformer, aggregate_chi, segment_power_grid

__version__ = "0.1.0"

import math

import numpy as np
import pytest

from fedrem.cqa import (
    LinkBudget,
    NoiseModel,
    argmin_channel,
    capacity,
    empirical_outage,
    outage_probability,
    outage_threshold,
    select_channel,
)
from fedrem.gmm import GmmParams, sample
from fedrem.interference import ChannelConfig
from fedrem.rem import RemEntry, RemStore


@pytest.fixture
def link():
    return LinkBudget(1e-3, 1e-8, 3e6, ChannelConfig(2.412e9))


def test_capacity_matches_loop(link):
    noise = NoiseModel(1e-15)
    interf = np.linspace(0, 1e-10, 48)
    expected = sum(10e6 / 64 * math.log2(1 + 1e-11 / (1e-15 + i)) for i in interf)
    assert capacity(link, noise, interf) == pytest.approx(expected, rel=1e-12)
    batch = capacity(link, noise, np.stack([interf, interf]))
    np.testing.assert_allclose(batch, expected, rtol=1e-12)


def test_capacity_validation(link):
    with pytest.raises(ValueError):
        capacity(link, NoiseModel(1e-15), np.zeros(47))
    with pytest.raises(ValueError):
        capacity(link, NoiseModel(1e-15), -np.ones(48))
    with pytest.raises(ValueError):
        NoiseModel(0.0)
    with pytest.raises(ValueError):
        LinkBudget(0.0, 1.0, 1.0, ChannelConfig(1e9))


def test_threshold_formula(link):
    expected = math.log(math.log(2) * 3e6 * 64 / (10e6 * 1e-11))
    assert outage_threshold(link) == pytest.approx(expected, rel=1e-15)


def test_default_scenario_thresholds(scenario):
    t = [outage_threshold(scenario.link_budget(i)) for i in range(3)]
    assert t == sorted(t)
    np.testing.assert_allclose(t, [25.82, 25.84, 25.86], atol=0.01)


def test_outage_probability_vs_monte_carlo():
    p = GmmParams([20.0, 26.0, 40.0], [0.1, 0.2, 0.7], 1.5)
    x = sample(p, 200_000, rng_seed=0)
    assert outage_probability(p, 27.0) == pytest.approx(np.mean(x < 27.0), abs=0.003)


def test_empirical_outage_strict():
    assert empirical_outage([1.0, 2.0, 3.0], 2.0) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        empirical_outage([], 1.0)


def test_low_snr_event_equivalence(link):
    # per-sub-channel SINR <= 0.1: capacity < c_th iff chi < t
    rng = np.random.default_rng(3)
    noise = NoiseModel(1e-15)
    s = link.received_power
    # trial-level scale over three decades, per-bin spread over one
    interf = s * 10 ** rng.uniform(1, 4, (5000, 1)) * 10 ** rng.uniform(0, 1, (5000, 48))
    c = capacity(link, noise, interf)
    link = LinkBudget(link.p_tx_per_subcarrier, link.channel_gain_H, float(np.median(c)), link.channel)
    t = outage_threshold(link)
    chi = np.log(np.sum(1 / (interf + noise.sigma_n_sq), axis=1))
    assert np.mean((c < link.c_th) == (chi < t)) >= 0.99


def test_argmin_ties_and_resolution():
    assert argmin_channel([0.3, 0.1, 0.1]) == 1
    assert argmin_channel([0.2, 0.2, 0.2]) == 0
    assert argmin_channel([1e-9, 1e-30, 0.2]) == 1
    assert argmin_channel([1e-9, 1e-30, 0.2], resolution=1e-4) == 0
    assert argmin_channel([0.01, 1e-30, 0.2], resolution=1e-4) == 1
    with pytest.raises(ValueError):
        argmin_channel([0.1], resolution=-1)


def test_select_channel(link):
    rem = RemStore()
    rem.put(0, 0, RemEntry(GmmParams([20.0], [1.0], 1.0)))
    rem.put(0, 1, RemEntry(GmmParams([40.0], [1.0], 1.0)))
    assert select_channel(rem, 0, [link, link]) == 1
    assert select_channel(rem, 0, [25.0, 25.0]) == 1
    with pytest.raises(KeyError, match="location 1, channel 0"):
        select_channel(rem, 1, [25.0, 25.0])

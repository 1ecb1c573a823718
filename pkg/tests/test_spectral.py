import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.pipeline import make_pipeline

from fedrem.interference import ChannelConfig
from fedrem.spectral import (
    ChiBatch,
    ChiTransformer,
    aggregate_chi,
    chi_from_iq,
    segment_power_grid,
    write_chi_csv,
    write_power_grid_csv,
)

F = ChannelConfig(2.412e9).usable_subchannels_F


def naive_grid(iq, nf):
    """Direct O(Nf^2) DFT per segment, |X_f|^2 / Nf^2."""
    seg = np.asarray(iq).reshape(-1, nf)
    n = np.arange(nf)
    W = np.exp(-2j * np.pi * np.outer(n, n) / nf)
    return np.abs(seg @ W.T) ** 2 / nf**2


def test_usable_set_default():
    assert len(F) == 48
    assert F[0] == 1 and F[23] == 24 and F[24] == 40 and F[-1] == 63
    assert 0 not in F


def test_grid_matches_naive_dft(rng):
    iq = rng.standard_normal(64 * 5) + 1j * rng.standard_normal(64 * 5)
    np.testing.assert_allclose(segment_power_grid(iq, 64), naive_grid(iq, 64), rtol=1e-10)


def test_parseval_row_sum_equals_mean_power(rng):
    iq = rng.standard_normal(64 * 50) + 1j * rng.standard_normal(64 * 50)
    grid = segment_power_grid(iq, 64)
    np.testing.assert_allclose(grid.sum(axis=1), np.mean(np.abs(iq.reshape(-1, 64)) ** 2, axis=1), rtol=1e-12)


def test_constant_signal_goes_to_dc():
    grid = segment_power_grid(np.full(64, 2.0 + 0j), 64)
    assert grid[0, 0] == pytest.approx(4.0)
    assert np.allclose(grid[0, 1:], 0.0, atol=1e-28)


def test_grid_accepts_channel_config(rng):
    iq = rng.standard_normal(128) + 0j
    np.testing.assert_array_equal(segment_power_grid(iq, ChannelConfig(2.4e9)), segment_power_grid(iq, 64))


def test_grid_rejects_ragged_capture():
    with pytest.raises(ValueError):
        segment_power_grid(np.zeros(100, complex), 64)
    with pytest.raises(ValueError):
        segment_power_grid(np.zeros(0, complex), 64)


def test_chi_known_value():
    grid = np.full((1, 64), 0.5)
    chi = aggregate_chi(grid, F)
    assert chi.chi_samples[0] == pytest.approx(np.log(48 * 2.0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1e-20, 1e3), min_size=64, max_size=64))
def test_chi_matches_loop_oracle(powers):
    grid = np.array(powers)[None, :]
    expected = np.log(sum(1.0 / powers[f] for f in F))
    assert aggregate_chi(grid, F).chi_samples[0] == pytest.approx(expected, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-18, 1e3), st.floats(1.01, 100.0))
def test_chi_decreases_when_powers_scale_up(p, factor):
    grid = np.full((1, 64), p)
    a = aggregate_chi(grid, F).chi_samples[0]
    b = aggregate_chi(grid * factor, F).chi_samples[0]
    assert b == pytest.approx(a - np.log(factor), abs=1e-9)


def test_chi_ignores_unusable_bins():
    grid = np.ones((1, 64))
    grid2 = grid.copy()
    grid2[0, 0] = 1e-30
    grid2[0, 30] = 1e-30
    assert aggregate_chi(grid, F).chi_samples[0] == aggregate_chi(grid2, F).chi_samples[0]


@pytest.mark.parametrize("bad", [0.0, -1.0, np.inf])
def test_chi_rejects_nonpositive_power(bad):
    grid = np.ones((2, 64))
    grid[1, 5] = bad
    with pytest.raises(ValueError):
        aggregate_chi(grid, F)


def test_chi_batch_is_readonly_and_labeled():
    b = aggregate_chi(np.ones((3, 64)), F, 4, 2)
    assert (b.location_index, b.channel_index, b.n_s, len(b)) == (4, 2, 3, 3)
    with pytest.raises(ValueError):
        b.chi_samples[0] = 1.0
    with pytest.raises(ValueError):
        ChiBatch([np.nan])


def test_chi_from_iq_and_transformer_agree(rng):
    from fedrem.interference import IqBatch

    iq = rng.standard_normal((2, 64 * 10)) + 1j * rng.standard_normal((2, 64 * 10))
    ch = ChannelConfig(2.4e9)
    direct = chi_from_iq(IqBatch(iq[0], 1, 0), ch).chi_samples
    tr = make_pipeline(ChiTransformer())
    out = tr.fit_transform(iq)
    assert out.shape == (2, 10)
    np.testing.assert_array_equal(out[0], direct)
    assert ChiTransformer(n_subchannels=32).get_params()["n_subchannels"] == 32


def test_csv_writers(tmp_path):
    grid = np.arange(2 * 64, dtype=float).reshape(2, 64) + 1
    write_power_grid_csv(tmp_path / "g.csv", grid)
    rows = list(csv.reader(open(tmp_path / "g.csv")))
    assert rows[0][:2] == ["segment", "p0"] and len(rows) == 3
    assert float(rows[2][64]) == grid[1, 63]
    b = aggregate_chi(grid, F, 1, 2)
    write_chi_csv(tmp_path / "c.csv", b)
    rows = list(csv.reader(open(tmp_path / "c.csv")))
    assert rows[0] == ["location", "channel", "segment", "chi"]
    assert float(rows[1][3]) == b.chi_samples[0]

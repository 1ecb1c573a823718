from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedrem.federated import LearningConfig, fed_avg_merge, local_update, n_th, weighted_average
from fedrem.gmm import GmmParams
from fedrem.rem import RemEntry


def random_model(rng, J=4):
    means = np.sort(rng.uniform(-10, 40, J))
    w = rng.dirichlet(np.ones(J))
    return GmmParams(means, w, rng.uniform(0.05, 3))


def brute_average(models, weights):
    """Exact rational weighted average of sorted parameters, rounded once."""
    tot = sum(Fraction(w) for w in weights)
    J = models[0].J

    def avg(get):
        return float(sum(Fraction(w) * Fraction(get(m)) for m, w in zip(models, weights)) / tot)

    means = [avg(lambda m, j=j: float(m.means[j])) for j in range(J)]
    mix = [avg(lambda m, j=j: float(m.weights[j])) for j in range(J)]
    return means, mix, avg(lambda m: m.sigma)


def test_n_th():
    assert n_th(100, 5, 30) == 100
    assert n_th(1000, 5, 30) == 150
    assert n_th(0, 5, 30) == 0
    with pytest.raises(ValueError):
        n_th(-1, 5, 30)


def test_config_validation():
    with pytest.raises(ValueError):
        LearningConfig(k=0)
    with pytest.raises(TypeError):
        LearningConfig(n_s=10.5)


def test_local_update_matches_oracle_on_random_sets():
    rng = np.random.default_rng(0)
    cfg = LearningConfig(k=5, n_s=1024)
    for _ in range(1000):
        old = RemEntry(random_model(rng), int(rng.integers(1, 20000)))
        new = random_model(rng)
        upd = local_update(old, new, cfg)
        w_old = min(old.n_samples_Nr, 5 * 1024)
        means, mix, sigma = brute_average([old.model, new], [w_old, 1024])
        np.testing.assert_allclose(upd.model.means, means, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(upd.model.weights, mix, rtol=1e-12, atol=1e-12)
        assert upd.model.sigma == pytest.approx(sigma, rel=1e-12)
        assert upd.n_samples_Nr == old.n_samples_Nr + 1024


def test_fed_avg_matches_oracle_on_random_sets():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        U = int(rng.integers(1, 8))
        models = [random_model(rng) for _ in range(U)]
        w = [int(rng.integers(1, 30000)) for _ in range(U)]
        merged = fed_avg_merge(list(zip(models, w)))
        means, mix, sigma = brute_average(models, w)
        np.testing.assert_allclose(merged.means, means, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(merged.weights, mix, rtol=1e-12, atol=1e-12)
        assert merged.sigma == pytest.approx(sigma, rel=1e-12)


def test_update_without_history_takes_temporal(rng):
    m = random_model(rng)
    e = local_update(None, m, LearningConfig(5, 100))
    assert e.model == m and e.n_samples_Nr == 100
    e = local_update(RemEntry(random_model(rng), 0), m, LearningConfig(5, 100))
    assert e.model == m and e.n_samples_Nr == 100


def test_component_count_mismatch(rng):
    with pytest.raises(ValueError):
        local_update(RemEntry(random_model(rng, 3), 10), random_model(rng, 4), LearningConfig())
    with pytest.raises(ValueError):
        fed_avg_merge([(random_model(rng, 3), 1), (random_model(rng, 4), 1)])
    with pytest.raises(ValueError):
        fed_avg_merge([])
    with pytest.raises(ValueError):
        weighted_average([random_model(rng)], [0])


def test_single_platoon_merge_is_identity(rng):
    m = random_model(rng)
    assert fed_avg_merge([(m, 123)]) == m


def test_identical_models_fixed_point(rng):
    m = random_model(rng)
    assert fed_avg_merge([(m, 3), (m, 11), (m, 7)]) == m
    assert local_update(RemEntry(m, 5000), m, LearningConfig(5, 1000)).model == m


def test_merge_independent_of_order(rng):
    pairs = [(random_model(rng), int(rng.integers(1, 100))) for _ in range(5)]
    assert fed_avg_merge(pairs) == fed_avg_merge(pairs[::-1])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 7))
def test_simplex_closure_and_betweenness(seed, U):
    rng = np.random.default_rng(seed)
    models = [random_model(rng) for _ in range(U)]
    w = rng.integers(1, 10**6, U).tolist()
    merged = fed_avg_merge(list(zip(models, w)))
    assert np.all(merged.weights >= 0)
    assert abs(merged.weights.sum() - 1.0) <= 1e-12
    stack_m = np.array([m.means for m in models])
    stack_w = np.array([m.weights for m in models])
    sig = np.array([m.sigma for m in models])
    eps = 1e-12
    assert np.all(merged.means >= stack_m.min(0) - eps * np.abs(stack_m).max())
    assert np.all(merged.means <= stack_m.max(0) + eps * np.abs(stack_m).max())
    assert np.all(merged.weights >= stack_w.min(0) - eps) and np.all(merged.weights <= stack_w.max(0) + eps)
    assert sig.min() * (1 - eps) <= merged.sigma <= sig.max() * (1 + eps)


def test_unsorted_inputs_matched_by_rank():
    a = GmmParams([0.0, 10.0], [0.5, 0.5], 1.0)
    b = GmmParams([12.0, 2.0], [0.25, 0.75], 1.0)
    m = fed_avg_merge([(a, 1), (b, 1)])
    np.testing.assert_allclose(m.means, [1.0, 11.0])
    np.testing.assert_allclose(m.weights, [0.625, 0.375])

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparse_poisson.errors import (BadIntensity, BadSparsity, DimensionMismatch, EmptyClass,
                                   IndexOutOfRange)
from sparse_poisson.model import (ModelSpec, ObservationMatrix, intensity_matrix,
                                  linear_functional, on_grid, sample_observations,
                                  validate_model)


def spec(**kw):
    base = dict(n=8, p=4, sigma=0.1, mu0=np.ones(4), mu_inf=1.0, signals={})
    base.update(kw)
    return ModelSpec(**base)


def test_validate_background_only():
    s = validate_model(spec())
    assert s.s == 0


def test_validate_empty_class():
    with pytest.raises(EmptyClass):
        validate_model(spec(mu_inf=0.5))


def test_validate_single_signal():
    s = validate_model(spec(signals={2: [2, 1, 1, 1]}, mu_inf=2.0))
    assert s.support == (2,)


@pytest.mark.parametrize("kw, exc", [
    (dict(signals={0: [0, 1, 1, 1]}), BadIntensity),
    (dict(signals={0: [3, 1, 1, 1]}, mu_inf=2.0), BadIntensity),
    (dict(signals={0: [1, 1, 1, 1]}), BadSparsity),
    (dict(n=1, signals={0: [2, 1, 1, 1], 1: [1, 2, 1, 1]}, mu_inf=2.0), BadSparsity),
    (dict(signals={9: [2, 1, 1, 1]}, mu_inf=2.0), IndexOutOfRange),
    (dict(signals={0: [2, 1, 1]}, mu_inf=2.0), DimensionMismatch),
    (dict(mu0=[1.0, -1.0, 1.0, 1.0]), BadIntensity),
])
def test_validate_rejects(kw, exc):
    with pytest.raises(exc):
        validate_model(spec(**kw))


def test_intensity_matrix_direct_placement():
    s = ModelSpec(n=3, p=2, sigma=1.0, mu0=[1, 2], mu_inf=4.0, signals={1: [3, 4]})
    M = intensity_matrix(s)
    assert np.array_equal(M, [[1, 3, 1], [2, 4, 2]])
    assert np.array_equal(linear_functional(M, [1, 2]), [2, 2])


def test_intensity_matrix_background_only():
    M = intensity_matrix(spec())
    assert np.array_equal(M, np.ones((4, 8)))
    assert np.array_equal(linear_functional(M, np.ones(4)), np.zeros(4))


def test_linear_functional_additive():
    s = spec(signals={0: [1.5, 1, 1, 1], 4: [1.5, 1, 1, 1]}, mu_inf=1.5)
    assert np.allclose(linear_functional(intensity_matrix(s), s.mu0), [1.0, 0, 0, 0])


def test_linear_functional_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        linear_functional(np.ones((3, 2)), np.ones(2))


@settings(max_examples=30, deadline=None)
@given(extra=st.integers(0, 20),
       lifts=st.lists(st.floats(0.1, 3.0), min_size=1, max_size=5))
def test_background_columns_do_not_change_functional(extra, lifts):
    mu0 = np.array([1.0, 0.5, 2.0])
    signals = {i: mu0 + d for i, d in enumerate(lifts)}
    mu_inf = max(mu0.max() + max(lifts), 2.0)
    a = ModelSpec(n=len(lifts), p=3, sigma=1.0, mu0=mu0, mu_inf=mu_inf, signals=signals)
    b = ModelSpec(n=len(lifts) + extra, p=3, sigma=1.0, mu0=mu0, mu_inf=mu_inf, signals=signals)
    La = linear_functional(intensity_matrix(a), mu0)
    Lb = linear_functional(intensity_matrix(b), mu0)
    assert np.allclose(La, Lb, rtol=1e-12, atol=1e-12)


def test_json_round_trip_is_one_based(small_spec):
    doc = json.loads(small_spec.to_json())
    assert sorted(doc["signals"]) == ["2", "6"]
    back = ModelSpec.from_json(small_spec.to_json())
    assert back.support == small_spec.support
    assert np.array_equal(intensity_matrix(back), intensity_matrix(small_spec))


def test_json_scalar_background():
    s = ModelSpec.from_dict({"n": 3, "p": 2, "sigma": 1, "mu0": 1.5, "mu_inf": 2,
                             "signals": {"3": [2, 2]}})
    assert np.array_equal(s.mu0, [1.5, 1.5])
    assert s.support == (2,)


def test_sample_observations_deterministic(small_spec):
    M = intensity_matrix(small_spec)
    a = sample_observations(M, small_spec.sigma, 11)
    b = sample_observations(M, small_spec.sigma, 11)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, sample_observations(M, small_spec.sigma, 12).values)


@pytest.mark.parametrize("sigma", [0.1, 0.3, 1.0, 1.7])
def test_observations_on_grid(sigma):
    M = np.linspace(0.05, 30.0, 60).reshape(6, 10)
    X = sample_observations(M, sigma, 3)
    assert on_grid(X.values, sigma)
    assert (X.values >= 0).all()
    assert not X.values.flags.writeable


def test_on_grid_detects_offgrid():
    assert not on_grid(np.array([[0.25, 0.3]]), 0.5)
    assert on_grid(np.array([[0.0, 0.75]]), 0.5)


def test_observation_moments_mu4():
    """mean 4 +- 3*2/1000 and variance sigma^2 mu = 4 +- 3 SE at 1e6 replications."""
    X = sample_observations(np.full((1, 10 ** 6), 4.0), 1.0, 77).values.ravel()
    assert abs(X.mean() - 4.0) <= 3 * 2 / 1000
    # SE of the sample variance from the Poisson(4) central fourth moment 4 + 3*16
    se_var = np.sqrt((52.0 - 16.0) / X.size)
    assert abs(X.var(ddof=1) - 4.0) <= 3 * se_var


@pytest.mark.parametrize("mu, sigma", [(0.3, 0.5), (2.0, 0.2), (5.0, 1.3)])
def test_heteroscedastic_moments(mu, sigma):
    reps = 200_000
    X = sample_observations(np.full((1, reps), mu), sigma, 5).values.ravel()
    var = sigma ** 2 * mu
    assert abs(X.mean() - mu) <= 3 * np.sqrt(var / reps)
    # Var of the sample variance: sigma^8 (a + 3a^2) - var^2 with a = mu / sigma^2
    a = mu / sigma ** 2
    se_var = np.sqrt((sigma ** 8 * (a + 3 * a * a) - var ** 2) / reps)
    assert abs(X.var(ddof=1) - var) <= 3 * se_var


def test_sample_rejects_nonpositive():
    with pytest.raises(BadIntensity):
        sample_observations(np.zeros((1, 2)), 1.0, 0)


def test_observation_matrix_is_array_like():
    X = ObservationMatrix([[0.25, 0.5]], 0.5)
    assert np.asarray(X).shape == (1, 2)

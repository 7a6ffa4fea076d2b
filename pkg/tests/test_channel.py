import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fblqos.channel import (
    ChannelParams,
    Deterministic,
    QosSpec,
    Rayleigh,
    db_to_linear,
    fading_expectation,
    gain_quantile,
    linear_to_db,
    make_rng,
    sample_gain,
)
from fblqos.exceptions import DomainError


def test_deterministic_samples_are_constant():
    rng = make_rng(1)
    assert sample_gain(Deterministic(1.0), rng) == 1.0
    assert np.all(sample_gain(Deterministic(1.0), rng, 1000) == 1.0)


def test_rayleigh_sample_mean_and_tail():
    z = sample_gain(Rayleigh(1.0), make_rng(2024), 1_000_000)
    assert abs(z.mean() - 1.0) <= 0.004
    assert abs(np.mean(z > 1.0) - math.exp(-1.0)) <= 0.002
    assert z.min() >= 0.0


def test_rayleigh_mean_power_scales_samples():
    a = sample_gain(Rayleigh(1.0), make_rng(5), 10)
    b = sample_gain(Rayleigh(3.0), make_rng(5), 10)
    np.testing.assert_allclose(b, 3.0 * a, rtol=1e-15)


def test_sampling_is_reproducible():
    a = sample_gain(Rayleigh(), make_rng(99), 100)
    b = sample_gain(Rayleigh(), make_rng(99), 100)
    assert np.array_equal(a, b)


def test_deterministic_expectation_is_exact():
    assert fading_expectation(Deterministic(2.0), lambda z: z ** 2) == 4.0


def test_rayleigh_expectations():
    assert fading_expectation(Rayleigh(1.0), lambda z: np.ones_like(z)) == pytest.approx(1.0, abs=1e-12)
    assert fading_expectation(Rayleigh(1.0), lambda z: np.exp(-z)) == pytest.approx(0.5, abs=1e-12)
    # mean-power scaling: E{z} = mean, E{z^2} = 2 mean^2
    assert fading_expectation(Rayleigh(2.5), lambda z: z) == pytest.approx(2.5, rel=1e-10)
    assert fading_expectation(Rayleigh(2.5), lambda z: z * z) == pytest.approx(12.5, rel=1e-9)


def test_quadrature_agrees_with_sampling():
    z = sample_gain(Rayleigh(), make_rng(11), 1_000_000)
    draws = np.log2(1 + z)
    se = draws.std() / math.sqrt(draws.size)
    assert abs(fading_expectation(Rayleigh(), lambda x: np.log2(1 + x)) - draws.mean()) <= 4 * se


def test_gain_quantile():
    assert gain_quantile(Rayleigh(1.0), 1 - math.exp(-2.0)) == pytest.approx(2.0, rel=1e-12)
    assert gain_quantile(Deterministic(0.7), 0.3) == 0.7


@pytest.mark.parametrize("kwargs", [
    dict(snr=0.0, blocklength_m=10), dict(snr=-1.0, blocklength_m=10),
    dict(snr=1.0, blocklength_m=0), dict(snr=1.0, blocklength_m=2.5),
    dict(snr=float("inf"), blocklength_m=10),
])
def test_channel_params_validation(kwargs):
    with pytest.raises(DomainError):
        ChannelParams(**kwargs)


def test_model_validation():
    with pytest.raises(DomainError):
        Rayleigh(0.0)
    with pytest.raises(DomainError):
        Deterministic(-1.0)
    with pytest.raises(DomainError):
        QosSpec(-0.1)


def test_from_db():
    p = ChannelParams.from_db(10.0, 500)
    assert p.snr == pytest.approx(10.0, rel=1e-15) and p.m == 500


@given(st.floats(-60.0, 60.0))
def test_db_round_trip(x_db):
    assert abs(linear_to_db(db_to_linear(x_db)) - x_db) <= 1e-12

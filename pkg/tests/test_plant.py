import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from learnattack.core import ConfigError, RandomSource
from learnattack.plant import (
    GainPrior,
    NonlinearPlant,
    ScalarPlant,
    VectorPlant,
    sample_gain,
    stationary_variance,
    step_nonlinear,
    step_scalar,
    step_vector,
)

real = st.floats(-1e6, 1e6, allow_nan=False)
A23 = np.array([[1.0, 2.0], [3.0, 4.0]])


def test_step_scalar_examples():
    assert step_scalar(ScalarPlant(1.0), 2.0, -1.0, 0.0) == 1.0
    assert step_scalar(ScalarPlant(0.5), 4.0, 1.0, 0.25) == 3.25
    assert step_scalar(ScalarPlant(0.0), 17.0, 0.0, 0.0) == 0.0


def test_step_vector_examples():
    assert np.array_equal(step_vector(VectorPlant(np.eye(2), np.eye(2)), [1, 1], [0, 0], [0, 0]), [1, 1])
    assert np.array_equal(step_vector(VectorPlant(A23, np.eye(2)), [1, 0], [0, 0], [0, 0]), [1, 3])
    assert np.array_equal(step_vector(VectorPlant(np.zeros((2, 2)), np.eye(2)), [3, 4], [5, -5], [0, 0]), [5, -5])


def test_step_vector_dimension_mismatch():
    with pytest.raises(ValueError):
        step_vector(VectorPlant(A23, np.eye(2)), [1, 0, 0], [0, 0], [0, 0])


def test_vector_plant_rejects_bad_shapes():
    with pytest.raises(ConfigError):
        VectorPlant(np.ones((2, 3)), np.eye(2))
    with pytest.raises(ConfigError):
        VectorPlant(A23, np.eye(3))
    with pytest.raises(ValueError):
        VectorPlant(A23, -np.eye(2))


def test_step_nonlinear_examples():
    p = NonlinearPlant("quadratic-sine")
    assert step_nonlinear(p, 0.0, 0.0, 0.0) == 0.0
    assert step_nonlinear(p, 1.0, -1.1, 0.0) == pytest.approx(0.741470984807897, abs=1e-12)
    assert step_nonlinear(p, 2.0, -4.4, 0.5) == pytest.approx(4 + math.sin(2) - 4.4 + 0.5, abs=1e-12)
    assert step_nonlinear(p, 2.0, -4.4, 0.5) == pytest.approx(1.00930, abs=1e-5)


def test_unknown_dynamics_is_config_error():
    with pytest.raises(ConfigError):
        NonlinearPlant("cubic")


def test_negative_noise_rejected():
    with pytest.raises(ConfigError):
        ScalarPlant(1.0, -0.1)


def test_default_initial_variance_is_noise_variance():
    assert ScalarPlant(1.0, 0.16).initial_var == 0.16
    assert ScalarPlant(1.0, 0.16, 2.0).initial_var == 2.0
    np.testing.assert_array_equal(VectorPlant(A23, np.diag([1.0, 2.0])).initial_cov, np.diag([1.0, 2.0]))


class TestSampleGain:
    def test_fixed(self):
        assert sample_gain(GainPrior("fixed", 1.0), RandomSource(0)) == 1.0

    def test_uniform_support_and_mean(self):
        prior = GainPrior("uniform", R=0.9)
        draws = np.array([sample_gain(prior, RandomSource(s)) for s in range(2000)])
        assert np.all(np.abs(draws) <= 0.9)
        big = RandomSource(12).uniform(-0.9, 0.9, 1_000_000)
        assert np.all(np.abs(big) <= 0.9)
        assert abs(big.mean()) < 3e-3

    def test_bad_prior(self):
        with pytest.raises(ConfigError):
            GainPrior("uniform", R=0.0)
        with pytest.raises(ConfigError):
            GainPrior("normal")


@given(real, real, real, real, real, real, st.floats(-3, 3))
def test_scalar_step_is_linear(x1, x2, u1, u2, w1, w2, a):
    p = ScalarPlant(a)
    lhs = step_scalar(p, x1 + x2, u1 + u2, w1 + w2)
    rhs = step_scalar(p, x1, u1, w1) + step_scalar(p, x2, u2, w2)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-6)


@given(st.floats(-3, 3), real, real, real)
def test_scalar_is_one_dimensional_vector(a, x, u, w):
    v = step_vector(VectorPlant([[a]], [[1.0]]), [x], [u], [w])[0]
    assert v == pytest.approx(step_scalar(ScalarPlant(a), x, u, w), rel=1e-15, abs=1e-15)


def test_closed_loop_stationary_variance():
    a, omega, n = 1.0, 0.88, 100_000
    w = RandomSource(77).normal(n)
    x, acc = 0.0, 0.0
    for k in range(n):
        x = step_scalar(ScalarPlant(a), x, -omega * x, w[k])
        acc += x * x
    assert acc / n == pytest.approx(stationary_variance(a - omega, 1.0), rel=0.05)


def test_stationary_variance_rejects_unstable():
    with pytest.raises(ValueError):
        stationary_variance(1.0, 1.0)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import besseli, mp

from twrnest.specfun import bessel_i, bessel_i_scaled, laguerre_half, noncentral_chi_mean, q_function

mp.dps = 40


def mp_bessel(order, x):
    return float(besseli(order, x))


@pytest.mark.parametrize("order", [0, 1])
@pytest.mark.parametrize("x", [0.0, 1e-8, 0.3, 1.0, 5.0, 14.9, 15.0, 15.1, 30.0, 100.0, 650.0])
def test_bessel_matches_arbitrary_precision(order, x):
    assert bessel_i(order, x) == pytest.approx(mp_bessel(order, x), rel=1e-13, abs=1e-300)


@pytest.mark.parametrize("order", [0, 1])
def test_scaled_matches_scipy(order):
    scipy_special = pytest.importorskip("scipy.special")
    x = np.linspace(-60, 60, 2401)
    np.testing.assert_allclose(bessel_i_scaled(order, x), scipy_special.ive(order, x), rtol=1e-12, atol=1e-300)


def test_scaled_large_argument():
    x = np.array([1e3, 1e6, 1e10])
    np.testing.assert_allclose(bessel_i_scaled(0, x), 1 / np.sqrt(2 * np.pi * x), rtol=1e-3)


def test_bessel_symmetry_and_lower_bound():
    x = np.linspace(-50, 50, 1001)
    i0 = bessel_i(0, x)
    assert np.all(i0 >= 1.0)
    np.testing.assert_array_equal(i0, bessel_i(0, -x))
    np.testing.assert_array_equal(bessel_i(1, -x), -bessel_i(1, x))


def test_bessel_rejects_bad_input():
    with pytest.raises(ValueError):
        bessel_i(2, 1.0)
    with pytest.raises(ValueError):
        bessel_i(0, np.nan)
    with pytest.raises(ValueError):
        bessel_i(0, 1e4)


def test_laguerre_values():
    assert laguerre_half(0.0) == pytest.approx(1.0, abs=1e-15)
    # independent closed form through mpmath
    for x in (-0.5, -1.0, -7.0, -40.0):
        h = x / 2
        ref = math.exp(h) * ((1 - x) * mp_bessel(0, h) + x * mp_bessel(1, h))
        assert laguerre_half(x) == pytest.approx(ref, rel=1e-13)


def test_laguerre_large_negative_asymptote():
    lam = np.array([1e4, 1e6, 1e8])
    ratio = np.sqrt(np.pi / 4) * laguerre_half(-lam) / np.sqrt(lam)
    np.testing.assert_allclose(ratio, 1.0, rtol=1e-4)


def test_laguerre_monotone_in_lambda():
    lam = np.linspace(0, 100, 2001)
    assert np.all(np.diff(laguerre_half(-lam)) > 0)


def test_noncentral_chi_mean_monte_carlo():
    rng = np.random.default_rng(5)
    lam, sigma2, n = 2.5, 0.7, 10_000_000
    mu = math.sqrt(lam * sigma2)
    noise = math.sqrt(sigma2 / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    env = np.abs(mu + noise)
    se = env.std() / math.sqrt(n)
    assert abs(env.mean() - noncentral_chi_mean(lam, sigma2)) < 4 * se


def test_noncentral_chi_mean_rayleigh():
    # lam = 0 is Rayleigh with mean sqrt(pi * sigma2) / 2
    assert noncentral_chi_mean(0.0, 2.0) == pytest.approx(math.sqrt(math.pi * 2.0) / 2)


def test_q_function_properties():
    rho = np.linspace(1e-3, 100, 5000)
    q = q_function(rho)
    assert np.all(q < 1.0)
    assert np.all(np.diff(q) > 0)
    assert q_function(100.0) > 0.99
    assert q_function(0.0) == pytest.approx(math.pi / 4)


def test_q_function_rejects_negative():
    with pytest.raises(ValueError):
        q_function(-1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.01, max_value=600) | st.floats(min_value=-600, max_value=-0.01))
def test_derivative_identity(x):
    # I0' = I1, checked on the scaled values away from the kink of exp(-|x|) at 0
    h = 1e-5 * max(1.0, abs(x))
    d = (bessel_i_scaled(0, x + h) - bessel_i_scaled(0, x - h)) / (2 * h)
    # d/dx[e^{-|x|} I0] = e^{-|x|}(I1 - sign(x) I0)
    expected = bessel_i_scaled(1, x) - np.sign(x) * bessel_i_scaled(0, x)
    assert d == pytest.approx(expected, rel=1e-4, abs=1e-8)

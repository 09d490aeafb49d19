import numpy as np
import pytest
from scipy.integrate import quad

from shelab.kernels import (fourier_indicator, heat_kernel,
                            kernel_product_identity, kernel_shift_identity,
                            log_heat_kernel)


def test_heat_kernel_spot_values():
    assert heat_kernel(1.0, 0.0) == pytest.approx(0.39894228040143267, rel=1e-15)
    assert heat_kernel(2.0, 0.0) == pytest.approx(0.2820947917738781, rel=1e-15)
    # independently cross-checked with 30-digit arithmetic:
    # p_1(3) = 0.0044318484119380071756...
    assert heat_kernel(1.0, 3.0) == pytest.approx(0.0044318484119380075, rel=1e-13)


def test_heat_kernel_symmetry_and_positivity():
    x = np.linspace(-5, 5, 101)
    p = heat_kernel(0.7, x)
    assert np.all(p > 0)
    assert np.allclose(p, p[::-1], rtol=1e-15)


def test_heat_kernel_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        heat_kernel(0.0, 1.0)
    with pytest.raises(ValueError):
        heat_kernel(-1.0, 1.0)


def test_heat_kernel_tail_underflows_to_zero():
    assert heat_kernel(1.0, 60.0) == 0.0
    # log form stays finite where the density itself underflows
    assert np.isfinite(log_heat_kernel(1.0, 60.0))


def test_normalization_by_trapezoid():
    for t in (0.1, 1.0, 10.0):
        h = np.sqrt(t) / 200
        x = np.arange(-12 * np.sqrt(t), 12 * np.sqrt(t) + h / 2, h)
        val = np.trapezoid(heat_kernel(t, x), dx=h)
        assert abs(val - 1.0) < 1e-8


def test_semigroup_identity_quadrature():
    rng = np.random.default_rng(5)
    for _ in range(5):
        t = rng.uniform(0.5, 2.0)
        s = rng.uniform(0.1, 0.9) * t
        x = rng.uniform(-2, 2)
        val = quad(lambda y: heat_kernel(s, x - y) * heat_kernel(t - s, y),
                   -np.inf, np.inf)[0]
        assert abs(val - heat_kernel(t, x)) < 1e-8


def test_shift_identity_examples():
    lhs, rhs = kernel_shift_identity(1.0, 0.25, 0.3, -0.2)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, lhs)
    lhs, rhs = kernel_shift_identity(1.0, 0.5, 0.0, 0.0)
    expected = heat_kernel(0.5, 0.0) ** 2 / heat_kernel(1.0, 0.0)
    assert lhs == pytest.approx(expected, rel=1e-12)
    assert rhs == pytest.approx(expected, rel=1e-12)
    lhs, rhs = kernel_shift_identity(3.0, 2.0, 1.7, -4.2)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, lhs)


def test_shift_identity_rejects_bad_s():
    for s in (0.0, 1.0, 1.5, -0.1):
        with pytest.raises(ValueError):
            kernel_shift_identity(1.0, s, 0.1, 0.2)


def test_product_identity_examples():
    lhs, rhs = kernel_product_identity(1.0, 1.0, -1.0)
    assert abs(lhs - rhs) <= 1e-12 * lhs
    lhs, rhs = kernel_product_identity(0.5, 0.0, 0.0)
    assert lhs == pytest.approx(heat_kernel(0.5, 0.0) ** 2, rel=1e-14)
    assert rhs == pytest.approx(2 * heat_kernel(1.0, 0.0) ** 2, rel=1e-14)
    lhs, rhs = kernel_product_identity(2.0, 3.3, 0.7)
    assert abs(lhs - rhs) <= 1e-12 * lhs
    with pytest.raises(ValueError):
        kernel_product_identity(0.0, 1.0, 1.0)


def test_identities_randomized():
    rng = np.random.default_rng(42)
    n = 10_000
    t = rng.uniform(0.05, 5.0, n)
    s = t * rng.uniform(0.02, 0.98, n)
    a = rng.uniform(-4, 4, n)
    b = rng.uniform(-4, 4, n)
    lhs, rhs = kernel_shift_identity(t, s, a, b)
    assert np.all(np.abs(lhs - rhs) <= 1e-12 * np.maximum(1.0, lhs))
    x = rng.uniform(-4, 4, n)
    y = rng.uniform(-4, 4, n)
    lhs, rhs = kernel_product_identity(t, x, y)
    assert np.all(np.abs(lhs - rhs) <= 1e-12 * np.maximum(lhs, rhs))


def test_fourier_indicator_at_zero_and_small_z():
    assert fourier_indicator(0.0, 1.0) == 1.0 + 0.0j
    # series branch agrees with the direct form just above the cut
    for z in (1e-7, 5e-7, 2e-6, 1e-3):
        direct = (np.exp(1j * 2.0 * z) - 1.0) / (1j * z)
        assert fourier_indicator(z, 2.0) == pytest.approx(direct, rel=1e-10)


def test_fourier_indicator_pi_modulus_and_quadrature():
    val = fourier_indicator(np.pi, 1.0)
    assert abs(val) == pytest.approx(2 / np.pi, rel=1e-12)
    # brute-force oracle: int_0^1 e^{izy} dy
    for z in (0.3, np.pi, 10.0):
        re = quad(lambda y: np.cos(z * y), 0, 1)[0]
        im = quad(lambda y: np.sin(z * y), 0, 1)[0]
        assert fourier_indicator(z, 1.0) == pytest.approx(re + 1j * im, abs=1e-10)


def test_fourier_indicator_decay_and_bound():
    assert abs(fourier_indicator(1e6, 1.0)) <= 2e-6
    rng = np.random.default_rng(3)
    z = rng.uniform(-100, 100, 1000)
    a = 1.7
    assert np.all(np.abs(fourier_indicator(z, a)) <= a + 1e-15)
    with pytest.raises(ValueError):
        fourier_indicator(1.0, 0.0)

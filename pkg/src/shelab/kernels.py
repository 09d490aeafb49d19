"""Gaussian heat kernel and the exact identities built on it.

Everything here is a closed-form, pure function: the kernel p_t(x) =
(2*pi*t)^(-1/2) exp(-x^2/(2t)), two algebraic identities used to rearrange
kernel products, and the Fourier transform of an indicator, which the
quadrature oracles integrate through z = 0.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "heat_kernel",
    "log_heat_kernel",
    "kernel_shift_identity",
    "kernel_product_identity",
    "fourier_indicator",
]

# |a*z| below this uses the series expansion of (e^{iaz}-1)/(iz); avoids the
# catastrophic cancellation of the direct form near z = 0.
_FOURIER_SERIES_CUT = 1e-6


def log_heat_kernel(t, x):
    """log p_t(x); finite for any x, so tail probes never underflow."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise ValueError("heat kernel requires t > 0")
    x = np.asarray(x, dtype=float)
    return -0.5 * np.log(2.0 * np.pi * t) - x * x / (2.0 * t)


def heat_kernel(t, x):
    """Gaussian density p_t(x) = (2*pi*t)^(-1/2) exp(-x^2/(2t)).

    Evaluated in log space and exponentiated; for |x| far in the tail the
    result underflows cleanly to 0.0.  t <= 0 raises ValueError.
    """
    out = np.exp(log_heat_kernel(t, x))
    if np.ndim(out) == 0:
        return float(out)
    return out


def kernel_shift_identity(t, s, a, b):
    """Both sides of p_{t-s}(a) p_s(b) / p_t(a+b) = p_{s(t-s)/t}(b - (s/t)(a+b)).

    Returns (lhs, rhs).  The left side is assembled in log space so the
    identity can be checked far into the tails.  Requires 0 < s < t.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s <= 0.0) or np.any(s >= t):
        raise ValueError("kernel_shift_identity requires 0 < s < t")
    log_lhs = (
        log_heat_kernel(t - s, a)
        + log_heat_kernel(s, b)
        - log_heat_kernel(t, a + b)
    )
    lhs = np.exp(log_lhs)
    rhs = heat_kernel(s * (t - s) / t, b - (s / t) * (a + b))
    if np.ndim(lhs) == 0:
        return float(lhs), float(rhs)
    return lhs, rhs


def kernel_product_identity(t, x, y):
    """Both sides of p_t(x) p_t(y) = 2 p_{2t}(x+y) p_{2t}(x-y).

    Returns (lhs, rhs); t <= 0 raises ValueError.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise ValueError("kernel_product_identity requires t > 0")
    lhs = np.exp(log_heat_kernel(t, x) + log_heat_kernel(t, y))
    rhs = 2.0 * np.exp(log_heat_kernel(2 * t, np.asarray(x) + y)
                       + log_heat_kernel(2 * t, np.asarray(x) - y))
    if np.ndim(lhs) == 0:
        return float(lhs), float(rhs)
    return lhs, rhs


def fourier_indicator(z, a):
    """Fourier transform of 1_[0,a] under the e^{+ixy} convention.

    Equals (e^{iaz} - 1)/(iz), continuously extended to a at z = 0 via the
    series a * sum_k (iaz)^k / (k+1)!.  Modulus is bounded by a.  a > 0
    required.
    """
    if a <= 0.0:
        raise ValueError("fourier_indicator requires a > 0")
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    w = a * z
    out = np.empty(z.shape, dtype=complex)
    small = np.abs(w) < _FOURIER_SERIES_CUT
    iw = 1j * w[small]
    # a * (1 + iw/2 + (iw)^2/6 + (iw)^3/24): next term is O(|w|^4) < 1e-24
    out[small] = a * (1.0 + iw / 2.0 + iw * iw / 6.0 + iw * iw * iw / 24.0)
    zl = z[~small]
    out[~small] = (np.exp(1j * a * zl) - 1.0) / (1j * zl)
    if scalar:
        return complex(out[0])
    return out

import numpy as np
import pytest

from shelab.sim import GridSpec, Field, height_residual
from shelab.kernels import heat_kernel
from shelab.stats import (CovarianceAccumulator, estimate_height_covariance,
                          fdd_covariance, ks_normality, spatial_average)


def _accumulate(rows, window, t=1.0, lags=(0.0, 0.5, 1.0, 2.0)):
    acc = CovarianceAccumulator(window)
    for i, row in enumerate(rows):
        acc.add(i, row)
    return acc.finalize(t, np.array(lags))


def test_iid_ensemble_covariance():
    rng = np.random.default_rng(0)
    window = np.arange(-5, 5.01, 0.5)
    rows = rng.standard_normal((4000, window.size))
    est = _accumulate(rows, window)
    assert abs(est.cov[0] - 1.0) <= 3 * est.se[0]
    for i in range(1, est.lags.size):
        assert abs(est.cov[i]) <= 3 * est.se[i]
    assert est.cov[0] >= 0
    assert np.all(est.se[est.n_effective > 1] > 0)


def test_exponential_covariance_recovered():
    # synthetic Gaussian field with cov exp(-|x|), built by Cholesky
    rng = np.random.default_rng(1)
    window = np.arange(-4, 4.01, 0.5)
    C = np.exp(-np.abs(window[:, None] - window[None, :]))
    L = np.linalg.cholesky(C)
    rows = rng.standard_normal((6000, window.size)) @ L.T
    est = _accumulate(rows, window, lags=(0.0, 0.5, 1.0, 2.0))
    for lag, c, s in zip(est.lags, est.cov, est.se):
        assert abs(c - np.exp(-lag)) <= 3.5 * s, (lag, c, s)


def test_merge_bit_identical_on_random_splits():
    rng = np.random.default_rng(2)
    window = np.arange(0, 3.01, 0.5)
    rows = rng.standard_normal((40, window.size))
    full = CovarianceAccumulator(window)
    for i, r in enumerate(rows):
        full.add(i, r)
    ref = full.finalize(1.0, [0.0, 1.0])
    for seed in range(5):
        perm = np.random.default_rng(seed).permutation(40)
        cut = 13 + seed
        a = CovarianceAccumulator(window)
        b = CovarianceAccumulator(window)
        for i in perm[:cut]:
            a.add(int(i), rows[i])
        for i in perm[cut:]:
            b.add(int(i), rows[i])
        merged = a.merge(b).finalize(1.0, [0.0, 1.0])
        assert np.array_equal(merged.cov, ref.cov)
        assert np.array_equal(merged.se, ref.se)


def test_merge_rejects_duplicates_and_mismatched_windows():
    w = np.arange(0, 1.01, 0.5)
    a = CovarianceAccumulator(w)
    a.add(0, np.zeros(3))
    b = CovarianceAccumulator(w)
    b.add(0, np.ones(3))
    with pytest.raises(ValueError):
        a.merge(b)
    c = CovarianceAccumulator(np.arange(0, 2.01, 0.5))
    with pytest.raises(ValueError):
        a.merge(c)
    with pytest.raises(ValueError):
        a.add(0, np.zeros(3))


def test_centering_invariance():
    rng = np.random.default_rng(3)
    window = np.arange(-2, 2.01, 0.5)
    rows = rng.standard_normal((100, window.size))
    est1 = _accumulate(rows, window, lags=(0.0, 1.0))
    drift = np.sin(window) + 3.0 * window ** 2
    est2 = _accumulate(rows + drift[None, :], window, lags=(0.0, 1.0))
    assert np.allclose(est1.cov, est2.cov, rtol=0, atol=1e-12)
    assert np.allclose(est1.se, est2.se, rtol=0, atol=1e-12)


def test_scale_equivariance():
    rng = np.random.default_rng(4)
    window = np.arange(-2, 2.01, 0.5)
    rows = rng.standard_normal((50, window.size))
    est1 = _accumulate(rows, window, lags=(0.0, 1.0))
    est2 = _accumulate(3.0 * rows, window, lags=(0.0, 1.0))
    assert np.allclose(est2.cov, 9.0 * est1.cov, rtol=1e-12)


def test_estimate_height_covariance_interface_and_errors():
    grid = GridSpec(dx=0.5, half_width=4.0, dt=0.2)
    x = grid.positions()
    rng = np.random.default_rng(5)
    residuals = []
    for _ in range(20):
        vals = heat_kernel(1.0, x) * np.exp(rng.standard_normal(x.size) * 0.1)
        residuals.append(height_residual(Field(grid=grid, time=1.0, values=vals)))
    est = estimate_height_covariance(residuals, 1.0, [0.0, 1.0], (-2.0, 2.0))
    assert est.cov.shape == (2,)
    with pytest.raises(ValueError):
        estimate_height_covariance(residuals, 1.0, [0.7], (-2.0, 2.0))  # off-lattice lag
    with pytest.raises(ValueError):
        estimate_height_covariance(residuals, 1.0, [0.0], (10.0, 11.0))  # empty window


def test_spatial_average_exact_cases():
    grid = GridSpec(dx=0.5, half_width=30.0, dt=0.2)
    x = grid.positions()
    t = 1.0
    res = height_residual(Field(grid=grid, time=t, values=heat_kernel(t, x)))
    # residual identically zero: centered at its own value -> 0
    s = spatial_average(res, 0.0, 20.0)
    assert s.value == pytest.approx(0.0, abs=1e-12)
    assert s.t == t and s.N == 20.0
    # residual = m + c: integral is exactly c N / sqrt(N log N)
    res.values[:] = 0.7
    s2 = spatial_average(res, 0.4, 20.0)
    expected = 0.3 * 20.0 / np.sqrt(20.0 * np.log(20.0))
    assert s2.value == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        spatial_average(res, 0.0, 2.0)    # N < 3
    with pytest.raises(ValueError):
        spatial_average(res, 0.0, 40.0)   # beyond the grid
    res.values[5] = np.nan
    res.valid[5] = False
    if 0 <= x[5] <= 20:
        with pytest.raises(ValueError):
            spatial_average(res, 0.0, 20.0)


def test_ks_normality_null_and_power():
    from shelab.noise import NoiseStream
    z = NoiseStream(31, 0).normals(0, 10_000)
    rep = ks_normality(z)
    assert rep.p_value > 1e-3 and not rep.reject
    u = np.random.default_rng(0).uniform(size=10_000)
    rep2 = ks_normality(u)
    assert rep2.p_value < 1e-6 and rep2.reject
    rep3 = ks_normality(np.full(100, 2.0))
    assert rep3.reject and rep3.statistic == 0.5 and rep3.p_value == 0.0
    with pytest.raises(ValueError):
        ks_normality(np.zeros(49))


def test_fdd_covariance_contracts():
    rng = np.random.default_rng(6)
    a = rng.standard_normal(500)
    cov, se = fdd_covariance(a, a)
    assert cov == pytest.approx(a.var(ddof=1), rel=1e-12)
    b = rng.standard_normal(500)
    cov2, se2 = fdd_covariance(a, b)  # independent pairing
    assert abs(cov2) <= 3 * se2
    with pytest.raises(ValueError):
        fdd_covariance(a, b[:-1])


def test_fdd_covariance_detects_dependence():
    rng = np.random.default_rng(7)
    a = rng.standard_normal(2000)
    b = 0.6 * a + 0.8 * rng.standard_normal(2000)
    cov, se = fdd_covariance(a, b)
    assert abs(cov - 0.6) <= 4 * se

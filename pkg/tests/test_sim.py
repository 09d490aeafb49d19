import numpy as np
import pytest

from shelab.kernels import heat_kernel, log_heat_kernel
from shelab.noise import NoiseStream, ZeroNoise, draw_slice
from shelab.sim import (Field, GridSpec, _BatchEngine, default_grid, evolve,
                        heat_step, heat_step_weights, height_residual,
                        init_dirac, noise_step)


def test_gridspec_basics():
    g = GridSpec(dx=0.1, half_width=1.0, dt=0.005)
    assert g.cell_count == 21
    assert g.origin_index == 10
    assert g.positions()[10] == 0.0
    with pytest.raises(ValueError):
        GridSpec(dx=0.1, half_width=1.0, dt=0.02)   # dt > dx^2
    with pytest.raises(ValueError):
        GridSpec(dx=0.1, half_width=0.05, dt=0.005)  # < 3 cells
    with pytest.raises(ValueError):
        GridSpec(dx=0.1, half_width=1.0, dt=0.005, boundary="reflecting")


def test_init_dirac_examples():
    g = GridSpec(dx=0.1, half_width=1.0, dt=0.005)
    f = init_dirac(g)
    assert f.values[10] == 10.0
    assert np.count_nonzero(f.values) == 1
    assert f.values.sum() * g.dx == 1.0
    g2 = default_grid(0.05, 20.0)
    f2 = init_dirac(g2)
    assert f2.values.sum() * g2.dx == 1.0


def test_heat_weights_are_positive_mass_one_variance_exact():
    for dx, dt in [(0.1, 0.005), (0.05, 0.00125), (0.2, 0.04)]:
        w = heat_step_weights(dx, dt)
        assert np.all(w > 0)
        assert w.sum() == pytest.approx(1.0, abs=1e-15)
        j = np.arange(len(w)) - len(w) // 2
        disc_var = (w * (j * dx) ** 2).sum()
        assert disc_var == pytest.approx(dt, rel=1e-12)


def test_heat_step_zero_and_constant_fields():
    g = GridSpec(dx=0.1, half_width=1.0, dt=0.005, boundary="periodic")
    zero = Field(grid=g, time=0.0, values=np.zeros(g.cell_count))
    assert np.all(heat_step(zero).values == 0.0)
    const = Field(grid=g, time=0.0, values=np.full(g.cell_count, 2.5))
    out = heat_step(const)
    assert np.allclose(out.values, 2.5, rtol=1e-14)
    assert out.time == pytest.approx(g.dt)


def test_heat_step_mass_conservation_and_positivity():
    gp = GridSpec(dx=0.1, half_width=2.0, dt=0.005, boundary="periodic")
    f = init_dirac(gp)
    for _ in range(50):
        f = heat_step(f)
    assert f.values.min() >= 0.0
    assert f.values.sum() * gp.dx == pytest.approx(1.0, rel=1e-12)
    gd = GridSpec(dx=0.1, half_width=2.0, dt=0.005, boundary="dirichlet_zero")
    f = init_dirac(gd)
    masses = [f.values.sum() * gd.dx]
    for _ in range(400):
        f = heat_step(f)
        masses.append(f.values.sum() * gd.dx)
    assert all(b <= a + 1e-15 for a, b in zip(masses, masses[1:]))
    assert f.values.min() >= 0.0


def test_heat_step_dirac_matches_gaussian_with_refinement_order():
    errs = {}
    for dx in (0.05, 0.025):
        g = default_grid(dx, 20.0)
        f = init_dirac(g)
        for _ in range(g.step_of(1.0)):
            f = heat_step(f)
        x = g.positions()
        m = np.abs(x) <= 4.0
        p = heat_kernel(1.0, x[m])
        errs[dx] = np.max(np.abs(f.values[m] - p) / p)
    assert errs[0.05] < 1e-3
    order = np.log2(errs[0.05] / errs[0.025])
    assert order >= 1.0


def test_noise_step_formula_and_errors():
    g = GridSpec(dx=0.1, half_width=1.0, dt=0.005)
    f = init_dirac(g)
    out = noise_step(f, draw_slice(ZeroNoise(), 0, g.cell_count))
    factor = np.exp(-g.dt / (2 * g.dx))
    assert factor < 1.0
    assert np.allclose(out.values, f.values * factor, rtol=1e-15)
    assert out.time == f.time
    zero = Field(grid=g, time=0.0, values=np.zeros(g.cell_count))
    assert np.all(noise_step(zero, draw_slice(NoiseStream(1, 0), 0, g.cell_count)).values == 0.0)
    with pytest.raises(ValueError):
        noise_step(f, draw_slice(NoiseStream(1, 0), 0, g.cell_count - 1))


def test_noise_factor_mean_one():
    g = GridSpec(dx=0.1, half_width=0.2, dt=0.005)
    n = 100_000
    sig = np.sqrt(g.dt / g.dx)
    xi = np.concatenate([NoiseStream(9, r).normals(0, 5000) for r in range(20)])
    factors = np.exp(sig * xi - g.dt / (2 * g.dx))
    se = np.sqrt(np.expm1(g.dt / g.dx)) / np.sqrt(n)
    assert abs(factors.mean() - 1.0) <= 3 * se


def test_evolve_zero_noise_matches_heat_flow_times_splitting_factor():
    g = default_grid(0.1, 5.0)
    k = g.step_of(0.5)
    fields = evolve(g, ZeroNoise(), [0.5])
    f = init_dirac(g)
    for _ in range(k):
        f = heat_step(f)
    oracle = f.values * np.exp(-k * g.dt / (2 * g.dx))
    got = fields[0].values
    nz = oracle > 0
    assert np.max(np.abs(got[nz] - oracle[nz]) / oracle[nz]) <= 1e-12
    assert np.array_equal(got == 0.0, oracle == 0.0)


def test_evolve_deterministic_and_validates_checkpoints():
    g = default_grid(0.1, 2.0)
    a = evolve(g, NoiseStream(3, 1), [0.05, 0.1])
    b = evolve(g, NoiseStream(3, 1), [0.05, 0.1])
    assert np.array_equal(a[0].values, b[0].values)
    assert np.array_equal(a[1].values, b[1].values)
    with pytest.raises(ValueError):
        evolve(g, NoiseStream(3, 1), [0.0501])
    with pytest.raises(ValueError):
        evolve(g, NoiseStream(3, 1), [0.1, 0.05])
    with pytest.raises(ValueError):
        evolve(g, NoiseStream(3, 1), [0.0])


def test_positivity_from_dirac_data():
    g = default_grid(0.1, 3.0)
    fields = evolve(g, NoiseStream(17, 5), [0.2, 0.45])
    for f in fields:
        assert f.values.min() >= 0.0


def test_height_residual_contracts():
    g = default_grid(0.1, 3.0)
    x = g.positions()
    vals = heat_kernel(0.5, x)
    r = height_residual(Field(grid=g, time=0.5, values=vals.copy()))
    assert np.allclose(r.values[r.valid], 0.0, atol=1e-12)
    vals2 = vals.copy()
    vals2[0] = 0.0
    r2 = height_residual(Field(grid=g, time=0.5, values=vals2))
    assert not r2.valid[0] and r2.invalid_count == 1
    assert np.isnan(r2.values[0]) and np.isfinite(r2.values[1:]).all()
    with pytest.raises(ValueError):
        height_residual(init_dirac(g))


def test_noise_free_residual_is_flat():
    g = default_grid(0.05, 8.0)
    k = g.step_of(1.0)
    f = evolve(g, ZeroNoise(), [1.0])[0]
    r = height_residual(f)
    m = np.abs(g.positions()) <= 4.0
    expected = -k * g.dt / (2 * g.dx)
    assert np.max(np.abs(r.values[m] - expected)) <= 1e-3


def test_batch_engine_absolute_matches_public_evolve():
    g = default_grid(0.1, 3.0)
    seen = {}
    eng = _BatchEngine(g, master_seed=12, mode="absolute")
    eng.run([4, 9], [g.step_of(0.3)], lambda k, reps, Z: seen.update({r: Z[i].copy() for i, r in enumerate(reps)}))
    for rep in (4, 9):
        ref = evolve(g, NoiseStream(12, rep), [0.3])[0]
        assert np.array_equal(seen[rep], ref.values)


def test_batch_engine_relative_agrees_with_absolute():
    g = default_grid(0.1, 4.0)
    k = g.step_of(0.4)
    outa, outr = {}, {}
    _BatchEngine(g, 5, mode="absolute").run(
        [0, 1], [k], lambda kk, reps, Z: outa.update({r: Z[i].copy() for i, r in enumerate(reps)}))
    _BatchEngine(g, 5, mode="relative").run(
        [0, 1], [k], lambda kk, reps, LZ: outr.update({r: LZ[i].copy() for i, r in enumerate(reps)}))
    for rep in (0, 1):
        za = outa[rep]
        lz = outr[rep]
        both = za > 0
        assert np.allclose(np.log(za[both]), lz[both], rtol=0, atol=1e-9)
        # relative mode reaches at least as far as the absolute representation
        assert np.all(np.isfinite(lz[both]))


def test_relative_mode_mean_one_far_field():
    # E[Z] equals the discrete heat kernel cell-wise (noise factors have mean
    # one), so E[Z / (K_k/dx)] = 1 even far outside the float64 underflow
    # radius of the absolute representation (|x| ~ 37 sqrt(t) here).
    g = default_grid(0.2, 60.0)
    k = g.step_of(0.8)
    eng = _BatchEngine(g, 31, mode="relative")
    logK = np.full(g.cell_count, -1.0e30)
    logK[g.origin_index] = 0.0
    for _ in range(k):
        logK, _ = eng._advance_logK(logK)
    rows = {}
    eng.run(range(400), [k],
            lambda kk, reps, LZ: rows.update(
                {r: LZ[i].copy() for i, r in enumerate(reps)}))
    lz = np.stack([rows[r] for r in sorted(rows)])
    x = g.positions()
    probe = np.abs(np.abs(x) - 40.0) < 1.0   # |x| ~ 40 >> 37 sqrt(t)
    assert np.isfinite(lz[:, probe]).all()
    v = np.exp(lz[:, probe] - (logK[probe] - np.log(g.dx)))
    vm = v.mean(axis=0)
    se = v.std(axis=0, ddof=1) / np.sqrt(v.shape[0])
    assert np.all(np.abs(vm - 1.0) <= 5 * se)

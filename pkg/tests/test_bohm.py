"""Tests for quantum-equilibrium sampling, guidance integration,
equivariance and the double slit."""

import numpy as np
import pytest

from hjflow.bohm import (
    BohmConfig,
    DoubleSlitGeometry,
    double_slit_scenario,
    equivariance_check,
    fringe_analysis,
    integrate_bohm,
    ks_band,
    lattice_fringe_report,
    sample_quantum_equilibrium,
)
from hjflow.errors import SamplingError, StatisticalPowerError
from hjflow.minplus import Grid
from hjflow.quantum import (
    CoherentStateParams,
    WaveFunction,
    coherent_state,
    classical_ho_motion,
    gaussian_packet,
    split_step_slices,
)

HBAR, MASS = 1.0, 1.0


class TestSampling:
    def test_gaussian_moments(self):
        grid = Grid.regular(-10, 10, 1024)
        sigma, x0 = 1.0, 0.4
        psi = gaussian_packet(grid, x0, sigma, 0.0, HBAR, MASS)
        xs = sample_quantum_equilibrium(psi, 10_000, seed=1)
        se_mean = sigma / np.sqrt(10_000)
        se_var = sigma**2 * np.sqrt(2.0 / 10_000)
        assert abs(xs.mean() - x0) < 3 * se_mean
        assert abs(xs.var() - sigma**2) < 3 * se_var

    def test_single_sample_deterministic(self):
        grid = Grid.regular(-5, 5, 256)
        psi = gaussian_packet(grid, 0.0, 1.0, 0.0, HBAR, MASS)
        a = sample_quantum_equilibrium(psi, 1, seed=42)
        b = sample_quantum_equilibrium(psi, 1, seed=42)
        assert a[0] == b[0]

    def test_mixture_weights(self):
        grid = Grid.regular(-12, 12, 1024)
        up = gaussian_packet(grid, 3.0, 0.8, 0.0, HBAR, MASS)
        dn = gaussian_packet(grid, -3.0, 0.8, 0.0, HBAR, MASS)
        w_up = np.sqrt(0.7)
        psi = WaveFunction(grid, w_up * up.psi + np.sqrt(0.3) * dn.psi, HBAR, MASS).normalized()
        xs = sample_quantum_equilibrium(psi, 10_000, seed=3)
        frac = float(np.mean(xs > 0))
        se = np.sqrt(0.7 * 0.3 / 10_000)
        assert abs(frac - 0.7) < 3 * se

    def test_degenerate_density(self):
        grid = Grid.regular(-1, 1, 64)
        psi = WaveFunction(grid, np.zeros(64, dtype=complex), HBAR, MASS)
        with pytest.raises(SamplingError):
            sample_quantum_equilibrium(psi, 10, seed=0)

    def test_2d_moments(self):
        grid = Grid.regular2d((-8, -8), (8, 8), (256, 256))
        psi = gaussian_packet(grid, (0.5, -0.7), 0.9, (0.0, 0.0), HBAR, MASS)
        xs = sample_quantum_equilibrium(psi, 8000, seed=5)
        assert xs.shape == (8000, 2)
        assert abs(xs[:, 0].mean() - 0.5) < 3 * 0.9 / np.sqrt(8000)
        assert abs(xs[:, 1].mean() + 0.7) < 3 * 0.9 / np.sqrt(8000)


class TestGuidance:
    def test_coherent_rigid_transport(self):
        params = CoherentStateParams(MASS, 1.0, (0.6,), (0.0,), HBAR)
        grid = params.default_grid(nodes=1024)
        times = np.linspace(0.0, np.pi / 2, 513)
        slices = [(float(t), coherent_state(params, float(t), grid=grid)[0]) for t in times]
        x0 = sample_quantum_equilibrium(slices[0][1], 100, seed=3)
        bundle = integrate_bohm(slices, x0, dt=float(times[1] - times[0]))
        xi_end = classical_ho_motion(params, float(times[-1]))[0][0]
        dev = (bundle.positions[:, -1] - bundle.positions[:, 0]) - (xi_end - 0.6)
        assert np.max(np.abs(dev)) < 1e-6

    def test_plane_wave_constant_velocity(self):
        grid = Grid.regular(-20, 20, 1024)
        v0 = 0.7
        psi = gaussian_packet(grid, 0.0, 3.0, v0, HBAR, MASS)
        slices = split_step_slices(psi, np.zeros(1024), 1e-2, 50, record_every=10)
        x0 = np.linspace(-1.0, 1.0, 11)
        bundle = integrate_bohm(slices, x0, dt=1e-2)
        t_end = bundle.times[-1]
        # near the packet center the phase gradient is m v0 to high accuracy
        assert np.allclose(bundle.positions[:, -1], x0 + v0 * t_end, atol=5e-4)

    def test_free_gaussian_fan_oracle(self):
        # X(t) = center + (X(0) - center) sqrt(1 + tau^2) for a packet at rest
        grid = Grid.regular(-24, 24, 2048)
        sigma = 1.0
        psi = gaussian_packet(grid, 0.0, sigma, 0.0, HBAR, MASS)
        t_end, n_steps = 2.0, 400
        slices = split_step_slices(psi, np.zeros(2048), t_end / n_steps, n_steps, record_every=8)
        x0 = np.array([-1.5, -0.7, -0.2, 0.3, 0.9, 1.8])
        bundle = integrate_bohm(slices, x0, dt=t_end / n_steps)
        tau = HBAR * t_end / (2 * MASS * sigma**2)
        expected = x0 * np.sqrt(1 + tau**2)
        assert np.max(np.abs(bundle.positions[:, -1] - expected)) < 1e-4
        assert bundle.order_preserved()

    def test_masked_particles_frozen(self):
        grid = Grid.regular(-12, 12, 1024)
        a = gaussian_packet(grid, 3.0, 0.8, 0.0, HBAR, MASS)
        b = gaussian_packet(grid, -3.0, 0.8, 0.0, HBAR, MASS)
        psi = WaveFunction(grid, a.psi - b.psi, HBAR, MASS).normalized()
        slices = [(0.0, psi), (0.1, psi), (0.2, psi)]
        x0 = np.array([11.5, 3.0])  # first one starts in sub-mask density
        bundle = integrate_bohm(slices, x0, dt=0.05)
        assert not bundle.valid[0, -1]
        assert bundle.positions[0, -1] == 11.5  # frozen, not extrapolated
        assert bundle.valid[1, -1]


class TestEquivariance:
    def test_free_packet_within_band(self):
        grid = Grid.regular(-24, 24, 1024)
        psi = gaussian_packet(grid, 0.0, 1.0, 0.0, HBAR, MASS)
        n = 4000
        slices = split_step_slices(psi, np.zeros(1024), 5e-3, 200, record_every=10)
        x0 = sample_quantum_equilibrium(psi, n, seed=12)
        bundle = integrate_bohm(slices, x0, dt=5e-3)
        ks = equivariance_check(bundle, slices)
        assert np.all(ks < ks_band(n))

    def test_biased_sampling_negative_control(self):
        grid = Grid.regular(-24, 24, 1024)
        psi = gaussian_packet(grid, 0.0, 1.0, 0.0, HBAR, MASS)
        n = 4000
        slices = split_step_slices(psi, np.zeros(1024), 5e-3, 100, record_every=50)
        x0 = np.abs(sample_quantum_equilibrium(psi, n, seed=12))  # upper half only
        bundle = integrate_bohm(slices, x0, dt=5e-3)
        ks = equivariance_check(bundle, slices)
        assert np.all(ks > 10 * ks_band(n))

    def test_too_few_particles(self):
        grid = Grid.regular(-10, 10, 256)
        psi = gaussian_packet(grid, 0.0, 1.0, 0.0, HBAR, MASS)
        slices = [(0.0, psi), (1.0, psi)]
        x0 = sample_quantum_equilibrium(psi, 50, seed=1)
        bundle = integrate_bohm(slices, x0, dt=0.5)
        with pytest.raises(StatisticalPowerError):
            equivariance_check(bundle, [(0.0, psi)])


@pytest.fixture(scope="module")
def result():
    return double_slit_scenario(DoubleSlitGeometry(), n_particles=100, seed=20)


class TestDoubleSlit:

    def test_fringes_resolved(self, result):
        assert result.fringes_histogram.n_fringes >= 3
        assert result.fringes_histogram.visibility > 0.5
        assert result.fringes_density.n_fringes >= 3
        assert result.fringes_density.visibility > 0.5

    def test_half_plane_confinement(self, result):
        up = result.bundle.positions[:, 0] > 0
        assert np.all(result.bundle.positions[up][result.bundle.valid[up]] > 0)
        assert np.all(result.bundle.positions[~up][result.bundle.valid[~up]] < 0)

    def test_non_crossing(self, result):
        assert result.bundle.order_preserved()

    def test_axis_symmetry(self, result):
        geo = result.geometry
        psi0 = geo.initial_state(geo.hbar_ref)
        dt_slice = geo.propagation_time / geo.n_slices
        slices = split_step_slices(psi0, np.zeros(psi0.grid.shape), dt_slice, geo.n_slices)
        x0 = np.array([-2.0, -1.0, 1.0, 2.0])
        bundle = integrate_bohm(slices, x0, dt=dt_slice)
        # reflecting X(0) about the axis reflects the trajectories
        assert np.allclose(bundle.positions[0], -bundle.positions[3], atol=1e-9)
        assert np.allclose(bundle.positions[1], -bundle.positions[2], atol=1e-9)

    def test_on_axis_particle_stays(self, result):
        geo = result.geometry
        psi0 = geo.initial_state(geo.hbar_ref)
        dt_slice = geo.propagation_time / geo.n_slices
        slices = split_step_slices(psi0, np.zeros(psi0.grid.shape), dt_slice, geo.n_slices)
        bundle = integrate_bohm(slices, np.array([0.0]), dt=dt_slice)
        assert np.max(np.abs(bundle.positions[0])) < 1e-9

    def test_deterministic_given_seed(self, result):
        again = double_slit_scenario(DoubleSlitGeometry(), n_particles=100, seed=20)
        assert np.array_equal(again.bundle.positions, result.bundle.positions)
        assert np.array_equal(again.screen_counts, result.screen_counts)


class TestFringeHelpers:
    def test_fringe_analysis_pure_cosine(self):
        x = np.linspace(-10, 10, 401)
        y = 1.0 + np.cos(2 * np.pi * x / 4.0)
        rep = fringe_analysis(x, y)
        assert rep.n_fringes == 5
        assert rep.visibility > 0.99

    def test_lattice_report_clean_pattern(self):
        # 4-pitch lattice: peak bins at center +- 4k, minima at center +- (4k+2)
        counts = np.array([12, 1, 2, 0, 20, 1, 1, 2, 10])
        rep = lattice_fringe_report(counts)
        assert rep.n_fringes == 3
        assert rep.visibility > 0.5


def test_bohm_config_validation():
    with pytest.raises(ValueError):
        BohmConfig(n_particles=0, seed=1, dt=0.1)
    with pytest.raises(ValueError):
        BohmConfig(n_particles=10, seed=1, dt=-0.1)

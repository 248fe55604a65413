"""Tests for closed-form and numeric actions, trajectories, and the
deterministic action."""

import numpy as np
import pytest

from hjflow.actions import (
    FreePotential,
    HarmonicPotential,
    LagrangianSpec,
    LinearPotential,
    TabulatedPotential,
    closed_action_kernel,
    deterministic_action,
    el_action_closed,
    el_action_numeric,
    optimal_trajectory_linear,
)
from hjflow.errors import (
    CausticError,
    ConvergenceError,
    InvalidHorizonError,
    StabilityError,
    UnsupportedPotentialError,
)
from hjflow.minplus import Grid, ScalarField

FREE = LagrangianSpec(1.0, FreePotential())
LIN = LagrangianSpec(1.0, LinearPotential((1.0,)))
HO = LagrangianSpec(1.0, HarmonicPotential(1.0))


class TestClosedAction:
    def test_free_particle(self):
        assert el_action_closed(FREE, 1.0, 1.0, 0.0) == pytest.approx(0.5)

    def test_linear_potential_value(self):
        # m=1, t=1, x0=x=0, K=1: K(x+x0)t/2 - K^2 t^3/(24 m) = -1/24
        assert el_action_closed(LIN, 0.0, 1.0, 0.0) == pytest.approx(-1.0 / 24.0)

    def test_free_exchange_symmetry_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            x0, x1, t = rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0.1, 2)
            assert el_action_closed(FREE, x1, t, x0) == el_action_closed(FREE, x0, t, x1)

    def test_invalid_horizon(self):
        with pytest.raises(InvalidHorizonError):
            el_action_closed(FREE, 1.0, 0.0, 0.0)
        with pytest.raises(InvalidHorizonError):
            el_action_closed(FREE, 1.0, -0.5, 0.0)

    def test_harmonic_caustic(self):
        with pytest.raises(CausticError):
            el_action_closed(HO, 1.0, np.pi, 0.0)

    def test_harmonic_zero_frequency_reduces_to_free(self):
        spec = LagrangianSpec(1.0, HarmonicPotential(0.0))
        assert el_action_closed(spec, 1.0, 1.0, 0.0) == el_action_closed(FREE, 1.0, 1.0, 0.0)

    def test_tabulated_has_no_closed_form(self):
        g = Grid.regular(-1, 1, 16)
        spec = LagrangianSpec(1.0, TabulatedPotential(ScalarField.full(g, 0.0)))
        with pytest.raises(UnsupportedPotentialError):
            el_action_closed(spec, 1.0, 1.0, 0.0)

    def test_2d_separable(self):
        spec = LagrangianSpec(1.2, LinearPotential((0.5, -0.3)))
        s2 = el_action_closed(spec, (1.0, 2.0), 0.7, (0.0, -1.0))
        spec_a = LagrangianSpec(1.2, LinearPotential((0.5,)))
        spec_b = LagrangianSpec(1.2, LinearPotential((-0.3,)))
        s1 = el_action_closed(spec_a, 1.0, 0.7, 0.0) + el_action_closed(spec_b, 2.0, 0.7, -1.0)
        assert s2 == pytest.approx(s1, rel=1e-15)

    def test_hj_pde_residual_order(self):
        # the closed form solves dS/dt + (dS/dx)^2/(2m) + V = 0; finite
        # differences of it converge at second order
        spec = LagrangianSpec(1.3, LinearPotential((0.8,)))
        x, t, x0 = 0.9, 1.1, -0.4

        def residual(h):
            st = (el_action_closed(spec, x, t + h, x0) - el_action_closed(spec, x, t - h, x0)) / (2 * h)
            sx = (el_action_closed(spec, x + h, t, x0) - el_action_closed(spec, x - h, t, x0)) / (2 * h)
            return abs(st + sx**2 / (2 * spec.mass) - 0.8 * x)

        r1, r2 = residual(1e-2), residual(5e-3)
        assert r1 < 1e-3
        assert r1 / r2 > 2.0  # order >= 1 (measured ~2)


class TestOptimalTrajectory:
    def test_free_straight_line(self):
        tr = optimal_trajectory_linear(1.0, 0.0, 2.0, 1.0, 0.0, n=11)
        assert np.allclose(tr.positions, np.linspace(0, 2, 11))

    def test_endpoints_exact(self):
        tr = optimal_trajectory_linear(2.0, 0.7, 1.3, 0.9, -0.4, n=7)
        assert tr.positions[0] == -0.4
        assert tr.positions[-1] == 1.3

    def test_initial_velocity_formula(self):
        # m=1, t=2, x0=x=0, K=1: v0 = (x-x0)/t - K t/(2m) = -1
        tr = optimal_trajectory_linear(1.0, 1.0, 0.0, 2.0, 0.0, n=5)
        assert tr.velocities[0] == pytest.approx(-1.0)

    def test_shooting_oracle(self):
        # integrating Newton's equation from (x0, v0-formula) lands on x
        m, K, t, x0, x1 = 1.7, -0.6, 1.4, 0.3, -1.1
        tr = optimal_trajectory_linear(m, K, x1, t, x0, n=3)
        v0 = tr.velocities[0]
        n = 4000
        h = t / n
        x, v = x0, v0
        for _ in range(n):  # symplectic Euler is exact for constant force anyway
            v = v + h * K / m
            x = x + h * (v - 0.5 * h * K / m)
        assert x == pytest.approx(x1, abs=1e-10)

    def test_invalid_horizon(self):
        with pytest.raises(InvalidHorizonError):
            optimal_trajectory_linear(1.0, 0.0, 1.0, -1.0, 0.0)


class TestNumericAction:
    def test_free_matches_closed(self):
        val, _ = el_action_numeric(FREE, 1.0, 1.0, 0.0, n_steps=200)
        assert val == pytest.approx(0.5, abs=1e-6)

    def test_free_two_segments_exact(self):
        # the straight-line start is the exact minimizer: no iterations needed
        val, _ = el_action_numeric(FREE, 1.0, 1.0, 0.0, n_steps=2)
        assert val == pytest.approx(0.5, abs=1e-12)

    def test_linear_matches_closed(self):
        val, _ = el_action_numeric(LIN, 0.0, 1.0, 0.0, n_steps=200)
        assert val == pytest.approx(-1.0 / 24.0, abs=1e-6)

    def test_harmonic_matches_closed(self):
        closed = el_action_closed(HO, 1.2, 1.0, 0.3)
        val, _ = el_action_numeric(HO, 1.2, 1.0, 0.3, n_steps=200)
        assert val == pytest.approx(closed, abs=1e-6)

    def test_never_below_continuous_minimum(self):
        rng = np.random.default_rng(1)
        for spec in (FREE, LIN, HO):
            for _ in range(10):
                x0, x1 = rng.uniform(-1.5, 1.5, 2)
                t = rng.uniform(0.3, 1.2)
                closed = el_action_closed(spec, x1, t, x0)
                val, _ = el_action_numeric(spec, x1, t, x0, n_steps=60)
                assert val >= closed - 1e-9

    def test_stationarity_of_returned_trajectory(self):
        val, tr = el_action_numeric(LIN, 0.4, 1.0, -0.2, n_steps=50)
        # discrete EL: interior parabola nodes obey x'' = K/m
        x = tr.positions
        h = tr.times[1] - tr.times[0]
        second = (x[2:] - 2 * x[1:-1] + x[:-2]) / h**2
        assert np.allclose(second, 1.0, atol=1e-6)

    def test_tabulated_potential_runs(self):
        # stationarity floor is set by the energy/gradient interpolation
        # mismatch of the table, so the tolerance is matched to the grid
        g = Grid.regular(-3, 3, 301)
        table = ScalarField(g, 0.5 * g.axis(0) ** 2)  # harmonic, tabulated
        spec = LagrangianSpec(1.0, TabulatedPotential(table))
        closed = el_action_closed(HO, 0.8, 0.9, 0.1)
        val, _ = el_action_numeric(spec, 0.8, 0.9, 0.1, n_steps=60, grad_tol=1e-5)
        assert val == pytest.approx(closed, abs=1e-3)

    def test_convergence_error_carries_residual(self):
        with pytest.raises(ConvergenceError) as err:
            el_action_numeric(LIN, 0.0, 1.0, 0.0, n_steps=100, max_iter=2)
        assert err.value.residual is not None
        assert err.value.residual > 0


class TestDeterministicAction:
    def test_free_particle_closed_form(self):
        det = deterministic_action(FREE, 0.5, 2.0, 1.0, 1e-3)
        t = det.times
        assert np.allclose(det.positions[:, 0], 0.5 + 2.0 * t, atol=1e-12)
        # g(t) = -m v0^2 t / 2 and S = m v0 x - m v0^2 t / 2
        assert np.allclose(det.g_values, -0.5 * 4.0 * t, atol=1e-12)
        assert det.action(1.0, 0.5) == pytest.approx(2.0 * 1.0 - 0.5 * 4.0 * 0.5)

    def test_harmonic_cosine(self):
        det = deterministic_action(HO, 1.0, 0.0, 2 * np.pi, 1e-3)
        assert np.max(np.abs(det.positions[:, 0] - np.cos(det.times))) < 1e-8

    def test_energy_conservation_scales_dt4(self):
        def drift(dt):
            det = deterministic_action(HO, 1.0, 0.5, 6.0, dt)
            e = 0.5 * det.velocities[:, 0] ** 2 + 0.5 * det.positions[:, 0] ** 2
            return np.max(np.abs(e - e[0]))

        d1, d2 = drift(2e-2), drift(1e-2)
        assert d1 / d2 > 12.0  # fourth order: ratio 16

    def test_invariants(self):
        det = deterministic_action(HO, 0.7, -0.3, 3.0, 1e-3)
        assert det.positions[0, 0] == 0.7
        assert det.velocities[0, 0] == -0.3
        assert det.g_values[0] == 0.0

    def test_hj_residual_zero_on_trajectory_only(self):
        det = deterministic_action(HO, 1.0, 0.0, 3.0, 1e-3)
        h = 1e-4

        def residual_at(x, t):
            st = (det.action(x, t + h) - det.action(x, t - h)) / (2 * h)
            sx = det.spec.mass * det.velocity_at(t)[0]  # grad S = m xi'
            v = 0.5 * x**2
            return st + sx**2 / 2.0 + v

        t = 1.234
        xi = det.xi_at(t)[0]
        assert abs(residual_at(xi, t)) < 1e-6
        assert abs(residual_at(xi + 0.5, t)) > 0.05  # generically nonzero off path

    def test_stability_error_on_blowup(self):
        with pytest.raises(StabilityError):
            deterministic_action(HO, 1.0, 0.0, 30.0, 3.0)

    def test_2d_harmonic(self):
        det = deterministic_action(HO, (1.0, 0.0), (0.0, 1.0), 2.0, 1e-3)
        assert np.allclose(det.positions[-1], [np.cos(2.0), np.sin(2.0)], atol=1e-9)


def test_closed_kernel_matches_el_action_closed():
    spec = LagrangianSpec(1.4, HarmonicPotential(0.9))
    k = closed_action_kernel(spec, 0.6)
    assert k(1.1, -0.2) == el_action_closed(spec, 1.1, 0.6, -0.2)

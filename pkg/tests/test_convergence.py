"""Tests for the hbar->0 sweep harness."""

import numpy as np
import pytest

from hjflow.bohm import DoubleSlitGeometry
from hjflow.convergence import (
    GaugeLinearEvolution,
    LinearScenario,
    SweepReport,
    SweepRow,
    action_limit_check,
    coherent_identity_residuals,
    coherent_limit_check,
    required_nodes_raw,
    trajectory_limit_check_double_slit,
    trajectory_limit_check_linear,
    wasserstein1_grid,
)
from hjflow.errors import ResolutionError
from hjflow.minplus import Grid, ScalarField
from hjflow.quantum import (
    CoherentStateParams,
    gaussian_packet,
    madelung_decompose,
    split_step_evolve,
)

SCN = LinearScenario()
FACTORS = (1.0, 1e-1, 1e-2, 1e-3, 1e-4)


class TestGaugeReduction:
    def test_matches_raw_split_step_at_reference_hbar(self):
        """The gauge identity is validated against a direct solve."""
        hbar = 1.0
        evo = GaugeLinearEvolution(SCN, hbar)
        k = len(evo.times) - 1
        t = float(evo.times[k])

        # raw solve of the same problem on a wide fixed grid
        grid = Grid.regular(-14.0, 20.0, 4096)
        x = grid.axis(0)
        rho0 = SCN.rho0(x)
        psi0_vals = np.sqrt(rho0) * np.exp(1j * SCN.mass * SCN.v0 * x / hbar)
        from hjflow.quantum import WaveFunction

        psi0 = WaveFunction(grid, psi0_vals, hbar, SCN.mass).normalized()
        pot = -SCN.force * x
        n_steps = 2000
        psi_t = split_step_evolve(psi0, pot, t / n_steps, n_steps)

        # compare densities on the co-moving window
        window = SCN.window_grid(t)
        rho_gauge = evo.rho_values(k)
        from hjflow.gridops import interp_linear

        rho_raw = interp_linear(grid, psi_t.density(), window.axis(0))
        assert np.max(np.abs(rho_gauge - rho_raw)) < 1e-5

        # compare actions where the mask holds
        s_gauge, mask = evo.s_values(k)
        pair = madelung_decompose(psi_t)
        s_raw = interp_linear(grid, np.where(pair.mask, pair.s.values, np.nan), window.axis(0))
        sel = mask & np.isfinite(s_raw)
        diff = s_gauge[sel] - s_raw[sel]
        diff -= 2 * np.pi * hbar * np.round(np.mean(diff) / (2 * np.pi * hbar))
        assert np.max(np.abs(diff)) < 1e-4

    def test_envelope_is_free_evolution(self):
        evo = GaugeLinearEvolution(SCN, 0.5)
        assert evo.envelopes[0].norm() == pytest.approx(1.0, abs=1e-12)
        # free evolution preserves momentum density: envelope mean stays put
        from hjflow.quantum import moments

        m0, _ = moments(evo.envelopes[0])
        m1, _ = moments(evo.envelopes[-1])
        assert m1 == pytest.approx(m0, abs=1e-9)


class TestActionLimit:
    def test_metrics_strictly_decreasing(self):
        rep = action_limit_check(SCN, FACTORS)
        assert rep.nonincreasing("action_sup_err", strict=True)
        assert rep.nonincreasing("density_dist", strict=True)

    def test_mask_coverage(self):
        rep = action_limit_check(SCN, FACTORS[:2])
        assert np.all(rep.metric("mask_coverage") >= 0.9)

    def test_raw_strategy_resolution_error(self):
        with pytest.raises(ResolutionError) as err:
            action_limit_check(SCN, (1e-4,), strategy="raw")
        assert err.value.required == required_nodes_raw(SCN, 1e-4 * SCN.hbar_ref)
        assert err.value.required > SCN.n_nodes

    def test_raw_strategy_feasible_at_reference(self):
        rep = action_limit_check(SCN, (1.0,), strategy="raw")
        assert rep.rows[0].action_sup_err > 0


class TestTrajectoryLimit:
    def test_linear_strictly_decreasing(self):
        rep = trajectory_limit_check_linear(SCN, FACTORS)
        assert rep.nonincreasing("traj_rms", strict=True)

    def test_paired_seed_self_comparison_zero(self):
        # identical hbar in both arms: classical-vs-classical deviation is 0
        rep = trajectory_limit_check_linear(SCN, (1e-12,), n=50)
        assert rep.rows[0].traj_rms < 1e-9

    def test_double_slit_strictly_decreasing(self):
        geo = DoubleSlitGeometry()
        rep, bundles = trajectory_limit_check_double_slit(geo, FACTORS, n=60, seed=20)
        assert rep.nonincreasing("traj_rms", strict=True)
        assert set(bundles) == set(FACTORS)


class TestCoherentLimit:
    def test_rows_and_slope(self):
        params = CoherentStateParams(1.0, 1.0, (0.5, 0.0), (0.0, 0.5), 1.0)
        rows, slope = coherent_limit_check(params, FACTORS)
        for r in rows:
            assert r.sigma_analytic == pytest.approx(
                np.sqrt(r.hbar_factor / 2.0), rel=1e-12
            )
            assert r.variance_rel_err < 1e-5
            assert r.identity_residual < 1e-12
        assert slope == pytest.approx(0.5, abs=0.01)
        # hbar -> hbar/1e4 shrinks the standard deviation 100x
        assert rows[0].sigma_analytic / rows[-1].sigma_analytic == pytest.approx(100.0, rel=1e-9)

    def test_identity_residual_machine_precision(self):
        params = CoherentStateParams(1.0, 1.0, (0.5, 0.0), (0.0, 0.5), 1.0)
        res = coherent_identity_residuals(params, 0.9, nodes=64)
        assert res < 1e-12


class TestHelpers:
    def test_wasserstein_shifted_gaussians(self):
        grid = Grid.regular(-10, 10, 2001)
        x = grid.axis(0)
        rho_a = np.exp(-(x**2) / 2)
        rho_b = np.exp(-((x - 0.5) ** 2) / 2)
        # W1 between translates equals the shift
        assert wasserstein1_grid(grid, rho_a, rho_b) == pytest.approx(0.5, abs=1e-3)

    def test_report_validation(self):
        rows = (SweepRow(1.0, 1.0), SweepRow(2.0, 0.5))
        with pytest.raises(ValueError):
            SweepReport("bad", rows)

"""End-to-end tests of the command-line interface."""

import json
from pathlib import Path

import pytest

from hjflow.cli import EXIT_NUMERICAL, EXIT_PARSE, EXIT_VALIDATION, main
from hjflow.runio import read_table_csv


def run_cli(args):
    return main([str(a) for a in args])


class TestHopfLax:
    def test_preset_run(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli(["hopf-lax", "--out", out,
                        "--set", "grid.nodes=256", "--set", "time.slices=2"])
        assert code == 0
        assert (out / "fields.csv").exists()
        assert (out / "velocity.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "ok"
        assert set(manifest["outputs"]) == {"fields.csv", "velocity.csv"}

    def test_fields_match_closed_form(self, tmp_path):
        import numpy as np

        out = tmp_path / "run"
        assert run_cli(["hopf-lax", "--out", out,
                        "--set", "grid.nodes=512", "--set", "time.slices=2",
                        "--set", "time.final=1.0"]) == 0
        _, data = read_table_csv(out / "fields.csv")
        m, v0, k = 1.0, 1.0, 0.8
        t, x, s = data["t"], data["x"], data["S"]
        sel = (t == 1.0) & (x > x.min() + 2.0)
        exact = (m * v0 * x + k * x * t - 0.5 * m * v0**2 * t
                 - 0.5 * k * v0 * t**2 - k**2 * t**3 / (6 * m))
        assert np.max(np.abs((s - exact)[sel])) < 1e-8

    def test_deterministic_outputs(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert run_cli(["hopf-lax", "--out", out,
                            "--set", "grid.nodes=128", "--set", "time.slices=1"]) == 0
            outs.append(json.loads((out / "manifest.json").read_text())["outputs"])
        assert outs[0] == outs[1]  # identical checksums for identical config

    def test_override_changes_artifacts(self, tmp_path):
        hashes = []
        for v0 in ("1.0", "1.5"):
            out = tmp_path / f"v{v0}"
            assert run_cli(["hopf-lax", "--out", out, "--set", f"initial.v0={v0}",
                            "--set", "grid.nodes=128", "--set", "time.slices=1"]) == 0
            hashes.append(json.loads((out / "manifest.json").read_text())["outputs"]["fields.csv"])
        assert hashes[0] != hashes[1]


class TestExitCodes:
    def test_parse_error(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("scenario = hopf-lax\n")  # bare string is not JSON
        assert run_cli(["hopf-lax", "--config", bad, "--out", tmp_path / "o"]) == EXIT_PARSE

    def test_unknown_key_rejected(self, tmp_path):
        assert run_cli(["hopf-lax", "--out", tmp_path / "o",
                        "--set", "grid.nodez=12"]) == EXIT_VALIDATION

    def test_wrong_scenario_for_subcommand(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text('scenario = "double-slit"\n')
        assert run_cli(["hopf-lax", "--config", cfg, "--out", tmp_path / "o"]) == EXIT_VALIDATION

    def test_numerical_error_exit_and_manifest(self, tmp_path):
        out = tmp_path / "o"
        # dt far too large for the harmonic phase rotation
        code = run_cli(["schrod", "--out", out,
                        "--set", 'physics.potential="harmonic"',
                        "--set", "time.dt=0.5", "--set", "time.steps=4"])
        assert code == EXIT_NUMERICAL
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "error"
        assert manifest["error"]

    def test_unknown_preset(self, tmp_path):
        assert run_cli(["hopf-lax", "--preset", "nope", "--out", tmp_path / "o"]) == EXIT_VALIDATION


class TestScenarios:
    def test_el_action(self, tmp_path):
        out = tmp_path / "o"
        assert run_cli(["el-action", "--out", out,
                        "--set", "numerics.segments=100"]) == 0
        _, data = read_table_csv(out / "action.csv")
        assert data["abs_diff"][0] < 1e-6
        assert (out / "trajectory.csv").exists()

    def test_deterministic(self, tmp_path):
        import numpy as np

        out = tmp_path / "o"
        assert run_cli(["deterministic", "--out", out,
                        "--set", "time.final=3.14", "--set", "numerics.dt=0.005"]) == 0
        _, data = read_table_csv(out / "trajectory.csv")
        assert np.allclose(data["x"], np.cos(data["t"]), atol=1e-7)

    def test_schrod(self, tmp_path):
        out = tmp_path / "o"
        assert run_cli(["schrod", "--out", out, "--set", "grid.nodes=256",
                        "--set", "time.steps=40", "--set", "time.record_every=20"]) == 0
        names, data = read_table_csv(out / "fields.csv")
        assert names == ["t", "x", "rho", "S"]
        _, norms = read_table_csv(out / "norms.csv")
        assert abs(norms["norm"][-1] - 1.0) < 1e-9

    def test_bohm(self, tmp_path):
        out = tmp_path / "o"
        assert run_cli(["bohm", "--out", out, "--set", "particles.n=150",
                        "--set", "grid.nodes=512", "--set", "time.steps=100",
                        "--set", "time.record_every=20"]) == 0
        lines = (out / "trajectories.ndjson").read_text().splitlines()
        rec = json.loads(lines[0])
        assert set(rec) == {"particle_id", "t", "x", "valid"}
        _, eq = read_table_csv(out / "equivariance.csv")
        assert (eq["ks"] < eq["band"] * 3).all()  # generous: n is small here

    def test_double_slit(self, tmp_path):
        out = tmp_path / "o"
        assert run_cli(["double-slit", "--out", out, "--seed", "20"]) == 0
        _, fr = read_table_csv(out / "fringes.csv")
        assert fr["n_fringes"][0] >= 3
        assert fr["visibility"][0] > 0.5
        rec = json.loads((out / "trajectories.ndjson").read_text().splitlines()[0])
        assert set(rec) == {"particle_id", "t", "z", "x", "slit", "valid"}

    def test_sweep_indiscerned(self, tmp_path):
        import numpy as np

        out = tmp_path / "o"
        assert run_cli(["sweep", "--out", out,
                        "--set", "sweep.factors=[1.0, 0.01]",
                        "--set", "particles.n=60"]) == 0
        _, data = read_table_csv(out / "sweep.csv")
        for col in ("action_sup_err", "density_dist", "traj_rms"):
            assert np.all(np.diff(data[col]) < 0)

    def test_sweep_coherent(self, tmp_path):
        out = tmp_path / "o"
        assert run_cli(["sweep", "--preset", "sweep-coherent", "--out", out,
                        "--set", "sweep.factors=[1.0, 0.1]"]) == 0
        _, data = read_table_csv(out / "sweep_coherent.csv")
        assert (data["variance_rel_err"] < 1e-5).all()
        assert (out / "slope.csv").exists()

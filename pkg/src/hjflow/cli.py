"""Command-line interface.

Subcommands: hopf-lax, el-action, deterministic, schrod, bohm, double-slit,
sweep.  Every run reads a scenario config (packaged preset and/or config
file, plus repeatable --set key=value overrides), validates it strictly,
writes its tables atomically under --out and always leaves a manifest.json
with the config echo, versions, wall time and output checksums.

Exit codes: 0 ok, 2 config parse error, 3 validation error, 4 numerical
error during the run.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from importlib import resources
from pathlib import Path

from .errors import (
    ConfigParseError,
    ConfigValidationError,
    HJFlowError,
)
from .runio import (
    Column,
    Option,
    RunManifest,
    TableSchema,
    apply_overrides,
    emit_table,
    parse_config_file,
    parse_config_text,
    validate_config,
)

EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4


# ---------------------------------------------------------------------------
# schemas
# ---------------------------------------------------------------------------

_PHYSICS = {
    "physics.mass": Option(float, 1.0, "particle mass"),
    "physics.potential": Option(str, "free", "free | linear | harmonic"),
    "physics.force": Option(float, 0.0, "force K for the linear potential"),
    "physics.omega": Option(float, 1.0, "angular frequency for harmonic"),
    "physics.hbar_ref": Option(float, 1.0, "reference hbar"),
    "physics.hbar_factor": Option(float, 1.0, "multiplier applied to hbar_ref"),
}

SCHEMAS: dict[str, dict[str, Option]] = {
    "hopf-lax": {
        "scenario": Option(str, "hopf-lax"),
        **{k: _PHYSICS[k] for k in ("physics.mass", "physics.potential", "physics.force", "physics.omega")},
        "initial.kind": Option(str, "linear", "linear (S0 = m v0 x) | delta"),
        "initial.v0": Option(float, 1.0),
        "initial.x0": Option(float, 0.0, "delta_min location"),
        "grid.center": Option(float, 0.0),
        "grid.halfwidth": Option(float, 14.0),
        "grid.nodes": Option(int, 2048),
        "time.final": Option(float, 2.0),
        "time.slices": Option(int, 8),
        "numerics.refine": Option(bool, True),
        "run.seed": Option(int, 0),
    },
    "el-action": {
        "scenario": Option(str, "el-action"),
        **{k: _PHYSICS[k] for k in ("physics.mass", "physics.potential", "physics.force", "physics.omega")},
        "endpoints.x0": Option(float, 0.0),
        "endpoints.x": Option(float, 1.0),
        "time.final": Option(float, 1.0),
        "numerics.segments": Option(int, 200),
        "trajectory.samples": Option(int, 101),
        "run.seed": Option(int, 0),
    },
    "deterministic": {
        "scenario": Option(str, "deterministic"),
        **{k: _PHYSICS[k] for k in ("physics.mass", "physics.potential", "physics.force", "physics.omega")},
        "initial.x0": Option(float, 1.0),
        "initial.v0": Option(float, 0.0),
        "time.final": Option(float, 6.283185307179586),
        "numerics.dt": Option(float, 1e-3),
        "run.seed": Option(int, 0),
    },
    "schrod": {
        "scenario": Option(str, "schrod"),
        **_PHYSICS,
        "initial.kind": Option(str, "gaussian", "gaussian | coherent"),
        "initial.center": Option(float, 0.0),
        "initial.sigma": Option(float, 1.0),
        "initial.velocity": Option(float, 0.0),
        "grid.center": Option(float, 0.0),
        "grid.halfwidth": Option(float, 20.0),
        "grid.nodes": Option(int, 1024),
        "time.dt": Option(float, 2e-3),
        "time.steps": Option(int, 500),
        "time.record_every": Option(int, 50),
        "run.seed": Option(int, 0),
    },
    "bohm": {
        "scenario": Option(str, "bohm"),
        **_PHYSICS,
        "initial.kind": Option(str, "gaussian"),
        "initial.center": Option(float, 0.0),
        "initial.sigma": Option(float, 1.0),
        "initial.velocity": Option(float, 0.0),
        "grid.center": Option(float, 0.0),
        "grid.halfwidth": Option(float, 20.0),
        "grid.nodes": Option(int, 1024),
        "time.dt": Option(float, 2e-3),
        "time.steps": Option(int, 500),
        "time.record_every": Option(int, 10),
        "particles.n": Option(int, 1000),
        "run.seed": Option(int, 11),
    },
    "double-slit": {
        "scenario": Option(str, "double-slit"),
        "physics.mass": Option(float, 1.0),
        "physics.hbar_ref": Option(float, 1.0),
        "physics.hbar_factor": Option(float, 1.0),
        "slit.separation": Option(float, 14.0),
        "slit.width": Option(float, 1.0),
        "screen.speed": Option(float, 1.0, "longitudinal speed: z = speed * t"),
        "screen.bins": Option(int, 21),
        "grid.halfwidth": Option(float, 75.0),
        "grid.nodes": Option(int, 2048),
        "time.final": Option(float, 20.0),
        "time.slices": Option(int, 640),
        "particles.n": Option(int, 100),
        "run.seed": Option(int, 20),
    },
    "sweep-indiscerned": {
        "scenario": Option(str, "sweep-indiscerned"),
        "sweep.factors": Option(list, [1.0, 1e-1, 1e-2, 1e-3, 1e-4]),
        "sweep.variant": Option(str, "linear", "linear | double-slit"),
        "physics.mass": Option(float, 1.0),
        "physics.force": Option(float, 0.8),
        "physics.hbar_ref": Option(float, 1.0),
        "initial.v0": Option(float, 1.0),
        "initial.center": Option(float, 0.0),
        "initial.sigma": Option(float, 1.0),
        "grid.halfwidth": Option(float, 14.0),
        "grid.nodes": Option(int, 1024),
        "time.final": Option(float, 2.0),
        "time.slices": Option(int, 8),
        "particles.n": Option(int, 400),
        "slit.separation": Option(float, 14.0),
        "slit.width": Option(float, 1.0),
        "run.seed": Option(int, 7),
    },
    "sweep-coherent": {
        "scenario": Option(str, "sweep-coherent"),
        "sweep.factors": Option(list, [1.0, 1e-1, 1e-2, 1e-3, 1e-4]),
        "physics.mass": Option(float, 1.0),
        "physics.omega": Option(float, 1.0),
        "physics.hbar_ref": Option(float, 1.0),
        "initial.x0": Option(list, [0.5, 0.0]),
        "initial.v0": Option(list, [0.0, 0.5]),
        "time.final": Option(float, 1.5707963267948966),
        "numerics.dt": Option(float, 2e-3),
        "grid.base_nodes": Option(int, 512),
        "run.seed": Option(int, 0),
    },
}

_SUBCOMMAND_KINDS = {
    "hopf-lax": ("hopf-lax",),
    "el-action": ("el-action",),
    "deterministic": ("deterministic",),
    "schrod": ("schrod",),
    "bohm": ("bohm", "double-slit"),
    "double-slit": ("double-slit",),
    "sweep": ("sweep-indiscerned", "sweep-coherent"),
}


def load_preset_text(name: str) -> str:
    ref = resources.files("hjflow.presets").joinpath(f"{name}.cfg")
    if not ref.is_file():
        available = sorted(
            p.name[:-4] for p in resources.files("hjflow.presets").iterdir()
            if p.name.endswith(".cfg")
        )
        raise ConfigValidationError(
            f"unknown preset {name!r}; available: {', '.join(available)}"
        )
    return ref.read_text()


def _build_potential(cfg):
    from .actions import FreePotential, HarmonicPotential, LinearPotential

    kind = cfg.get("physics.potential", "free")
    if kind == "free":
        return FreePotential()
    if kind == "linear":
        return LinearPotential((cfg["physics.force"],))
    if kind == "harmonic":
        return HarmonicPotential(cfg["physics.omega"])
    raise ConfigValidationError(f"unknown potential {kind!r}")


# ---------------------------------------------------------------------------
# runners (one per scenario kind); each returns a list of written paths
# ---------------------------------------------------------------------------

def run_hopf_lax(cfg, out: Path) -> list[Path]:
    import numpy as np

    from .actions import LagrangianSpec
    from .hopflax import solve_hj_slices, velocity_field
    from .minplus import Grid, ScalarField, delta_min

    spec = LagrangianSpec(cfg["physics.mass"], _build_potential(cfg))
    grid = Grid.regular(
        cfg["grid.center"] - cfg["grid.halfwidth"],
        cfg["grid.center"] + cfg["grid.halfwidth"],
        cfg["grid.nodes"],
    )
    if cfg["initial.kind"] == "linear":
        s0 = ScalarField(grid, cfg["physics.mass"] * cfg["initial.v0"] * grid.axis(0))
    elif cfg["initial.kind"] == "delta":
        s0 = delta_min(cfg["initial.x0"], grid)
    else:
        raise ConfigValidationError(f"unknown initial.kind {cfg['initial.kind']!r}")
    times = np.linspace(0.0, cfg["time.final"], cfg["time.slices"] + 1)
    sol = solve_hj_slices(spec, s0, times, refine=cfg["numerics.refine"])

    field_rows = []
    vel_rows = []
    x = grid.axis(0)
    for t, sl in zip(sol.times, sol.slices):
        for xi, si in zip(x, sl.values):
            field_rows.append((float(t), float(xi), float(si)))
        vf = velocity_field(sl, spec.mass)
        for xi, vi, ok in zip(x, vf.components[0], vf.mask):
            vel_rows.append((float(t), float(xi), float(vi) if ok else math.nan))
    paths = [
        emit_table(
            field_rows,
            TableSchema("fields", (Column("t", "time"), Column("x", "length"), Column("S", "energy*time"))),
            out / "fields.csv",
        ),
        emit_table(
            vel_rows,
            TableSchema("velocity", (Column("t", "time"), Column("x", "length"), Column("v", "length/time"))),
            out / "velocity.csv",
        ),
    ]
    return paths


def run_el_action(cfg, out: Path) -> list[Path]:
    from .actions import (
        LagrangianSpec,
        el_action_closed,
        el_action_numeric,
        optimal_trajectory_linear,
    )

    spec = LagrangianSpec(cfg["physics.mass"], _build_potential(cfg))
    x0, x1, t = cfg["endpoints.x0"], cfg["endpoints.x"], cfg["time.final"]
    closed = el_action_closed(spec, x1, t, x0)
    numeric, traj = el_action_numeric(spec, x1, t, x0, n_steps=cfg["numerics.segments"])
    rows = [(closed, numeric, abs(numeric - closed))]
    paths = [
        emit_table(
            rows,
            TableSchema(
                "action",
                (Column("closed", "energy*time"), Column("numeric", "energy*time"), Column("abs_diff", "energy*time")),
            ),
            out / "action.csv",
        )
    ]
    if cfg["physics.potential"] in ("free", "linear"):
        k = (cfg["physics.force"],) if cfg["physics.potential"] == "linear" else (0.0,)
        fan = optimal_trajectory_linear(
            spec.mass, k, x1, t, x0, n=cfg["trajectory.samples"]
        )
        rows = list(zip(fan.times, fan.positions, fan.velocities))
    else:
        rows = list(zip(traj.times, traj.positions, traj.velocities))
    paths.append(
        emit_table(
            rows,
            TableSchema("trajectory", (Column("s", "time"), Column("x", "length"), Column("v", "length/time"))),
            out / "trajectory.csv",
        )
    )
    return paths


def run_deterministic(cfg, out: Path) -> list[Path]:
    from .actions import LagrangianSpec, deterministic_action

    spec = LagrangianSpec(cfg["physics.mass"], _build_potential(cfg))
    det = deterministic_action(
        spec, cfg["initial.x0"], cfg["initial.v0"], cfg["time.final"], cfg["numerics.dt"]
    )
    rows = [
        (float(t), float(p[0]), float(v[0]), float(g))
        for t, p, v, g in zip(det.times, det.positions, det.velocities, det.g_values)
    ]
    return [
        emit_table(
            rows,
            TableSchema(
                "trajectory",
                (Column("t", "time"), Column("x", "length"), Column("v", "length/time"), Column("g", "energy*time")),
            ),
            out / "trajectory.csv",
        )
    ]


def _initial_state(cfg):
    from .minplus import Grid
    from .quantum import CoherentStateParams, coherent_state, gaussian_packet

    hbar = cfg["physics.hbar_ref"] * cfg["physics.hbar_factor"]
    grid = Grid.regular(
        cfg["grid.center"] - cfg["grid.halfwidth"],
        cfg["grid.center"] + cfg["grid.halfwidth"],
        cfg["grid.nodes"],
    )
    if cfg["initial.kind"] == "gaussian":
        psi = gaussian_packet(
            grid, cfg["initial.center"], cfg["initial.sigma"], cfg["initial.velocity"],
            hbar, cfg["physics.mass"],
        )
    elif cfg["initial.kind"] == "coherent":
        params = CoherentStateParams(
            cfg["physics.mass"], cfg["physics.omega"],
            (cfg["initial.center"],), (cfg["initial.velocity"],), hbar,
        )
        psi, _ = coherent_state(params, 0.0, grid=grid)
    else:
        raise ConfigValidationError(f"unknown initial.kind {cfg['initial.kind']!r}")
    return psi, grid, hbar


def run_schrod(cfg, out: Path) -> list[Path]:
    import numpy as np

    from .quantum import madelung_decompose, split_step_slices

    psi, grid, hbar = _initial_state(cfg)
    pot = _build_potential(cfg)
    slices = split_step_slices(
        psi, _pot_values(pot, grid, cfg["physics.mass"]),
        cfg["time.dt"], cfg["time.steps"], cfg["time.record_every"],
    )
    field_rows = []
    norm_rows = []
    x = grid.axis(0)
    for t, wf in slices:
        pair = madelung_decompose(wf)
        s_vals = np.where(pair.mask, pair.s.values, math.nan)
        for xi, ri, si in zip(x, pair.rho.values, s_vals):
            field_rows.append((float(t), float(xi), float(ri), float(si)))
        norm_rows.append((float(t), wf.norm()))
    return [
        emit_table(
            field_rows,
            TableSchema(
                "fields",
                (Column("t", "time"), Column("x", "length"), Column("rho", "1/length"), Column("S", "energy*time")),
            ),
            out / "fields.csv",
        ),
        emit_table(
            norm_rows,
            TableSchema("norms", (Column("t", "time"), Column("norm", "1"))),
            out / "norms.csv",
        ),
    ]


def _pot_values(potential, grid, mass):
    from .quantum import potential_on_grid

    return potential_on_grid(potential, grid, mass)


def run_bohm(cfg, out: Path) -> list[Path]:
    from .bohm import equivariance_check, integrate_bohm, ks_band, sample_quantum_equilibrium
    from .quantum import split_step_slices

    psi, grid, hbar = _initial_state(cfg)
    pot = _pot_values(_build_potential(cfg), grid, cfg["physics.mass"])
    slices = split_step_slices(
        psi, pot, cfg["time.dt"], cfg["time.steps"], cfg["time.record_every"]
    )
    x0 = sample_quantum_equilibrium(psi, cfg["particles.n"], cfg["run.seed"])
    bundle = integrate_bohm(slices, x0, dt=cfg["time.dt"])
    traj_rows = []
    for pid in range(bundle.n_particles):
        for k, t in enumerate(bundle.times):
            traj_rows.append(
                {
                    "particle_id": pid,
                    "t": float(t),
                    "x": float(bundle.positions[pid, k]),
                    "valid": bool(bundle.valid[pid, k]),
                }
            )
    ks = equivariance_check(bundle, slices)
    band = ks_band(cfg["particles.n"])
    ks_rows = [(float(t), float(s), band) for (t, _), s in zip(slices, ks)]
    return [
        emit_table(
            traj_rows,
            TableSchema(
                "trajectories",
                (Column("particle_id"), Column("t", "time"), Column("x", "length"), Column("valid")),
                kind="ndjson",
            ),
            out / "trajectories.ndjson",
        ),
        emit_table(
            ks_rows,
            TableSchema("equivariance", (Column("t", "time"), Column("ks", "1"), Column("band", "1"))),
            out / "equivariance.csv",
        ),
    ]


def run_double_slit(cfg, out: Path) -> list[Path]:
    from .bohm import DoubleSlitGeometry, double_slit_scenario

    geometry = DoubleSlitGeometry(
        slit_separation=cfg["slit.separation"],
        slit_width=cfg["slit.width"],
        mass=cfg["physics.mass"],
        hbar_ref=cfg["physics.hbar_ref"],
        propagation_time=cfg["time.final"],
        longitudinal_speed=cfg["screen.speed"],
        halfwidth=cfg["grid.halfwidth"],
        n_nodes=cfg["grid.nodes"],
        n_slices=cfg["time.slices"],
        screen_bins=cfg["screen.bins"],
    )
    res = double_slit_scenario(
        geometry,
        hbar_scale=cfg["physics.hbar_factor"],
        n_particles=cfg["particles.n"],
        seed=cfg["run.seed"],
    )
    return _emit_double_slit(res, geometry, out)


def _emit_double_slit(res, geometry, out: Path, suffix: str = "") -> list[Path]:
    import numpy as np

    bundle = res.bundle
    traj_rows = []
    for pid in range(bundle.n_particles):
        for k, t in enumerate(bundle.times):
            traj_rows.append(
                {
                    "particle_id": pid,
                    "t": float(t),
                    "z": float(t) * geometry.longitudinal_speed,
                    "x": float(bundle.positions[pid, k]),
                    "slit": int(res.slit_ids[pid]),
                    "valid": bool(bundle.valid[pid, k]),
                }
            )
    screen_rows = list(zip(res.screen_centers, (int(c) for c in res.screen_counts)))
    fringe_rows = [
        ("histogram", res.fringes_histogram.n_fringes, res.fringes_histogram.visibility),
        ("density", res.fringes_density.n_fringes, res.fringes_density.visibility),
    ]
    x = res.slices[-1][1].grid.axis(0)
    dens_rows = []
    stride = max(1, len(res.slices) // 8)
    for idx in range(0, len(res.slices), stride):
        t, wf = res.slices[idx]
        rho = wf.density()
        for xi, ri in zip(x[::4], rho[::4]):
            dens_rows.append((float(t), float(xi), float(ri)))
    t_end, wf_end = res.slices[-1]
    if (len(res.slices) - 1) % stride:
        rho = wf_end.density()
        for xi, ri in zip(x[::4], rho[::4]):
            dens_rows.append((float(t_end), float(xi), float(ri)))
    return [
        emit_table(
            traj_rows,
            TableSchema(
                "trajectories",
                (
                    Column("particle_id"),
                    Column("t", "time"),
                    Column("z", "length"),
                    Column("x", "length"),
                    Column("slit"),
                    Column("valid"),
                ),
                kind="ndjson",
            ),
            out / f"trajectories{suffix}.ndjson",
        ),
        emit_table(
            screen_rows,
            TableSchema("screen", (Column("x", "length"), Column("count", "1"))),
            out / f"screen{suffix}.csv",
        ),
        emit_table(
            fringe_rows,
            TableSchema("fringes", (Column("kind"), Column("n_fringes"), Column("visibility"))),
            out / f"fringes{suffix}.csv",
        ),
        emit_table(
            dens_rows,
            TableSchema("density", (Column("t", "time"), Column("x", "length"), Column("rho", "1/length"))),
            out / f"density{suffix}.csv",
        ),
    ]


def run_sweep(cfg, out: Path) -> list[Path]:
    factors = tuple(cfg["sweep.factors"])
    if cfg["scenario"] == "sweep-coherent":
        from .convergence import coherent_limit_check
        from .quantum import CoherentStateParams

        params = CoherentStateParams(
            cfg["physics.mass"],
            cfg["physics.omega"],
            tuple(cfg["initial.x0"]),
            tuple(cfg["initial.v0"]),
            cfg["physics.hbar_ref"],
        )
        rows, slope = coherent_limit_check(
            params, factors, t_final=cfg["time.final"], dt=cfg["numerics.dt"],
            base_nodes=cfg["grid.base_nodes"],
        )
        table = [
            (r.hbar_factor, r.sigma_analytic, r.sigma_measured, r.variance_rel_err,
             r.identity_residual, r.resolution)
            for r in rows
        ]
        return [
            emit_table(
                table,
                TableSchema(
                    "sweep_coherent",
                    (
                        Column("hbar_factor"),
                        Column("sigma_analytic", "length"),
                        Column("sigma_measured", "length"),
                        Column("variance_rel_err"),
                        Column("identity_residual", "energy*time"),
                        Column("resolution"),
                    ),
                ),
                out / "sweep_coherent.csv",
            ),
            emit_table(
                [(slope,)],
                TableSchema("slope", (Column("loglog_slope"),)),
                out / "slope.csv",
            ),
        ]

    if cfg["sweep.variant"] == "double-slit":
        from .bohm import DoubleSlitGeometry
        from .convergence import trajectory_limit_check_double_slit

        geometry = DoubleSlitGeometry(
            slit_separation=cfg["slit.separation"],
            slit_width=cfg["slit.width"],
            mass=cfg["physics.mass"],
            hbar_ref=cfg["physics.hbar_ref"],
        )
        report, results = trajectory_limit_check_double_slit(
            geometry, factors, n=cfg["particles.n"], seed=cfg["run.seed"]
        )
        paths = [
            emit_table(
                [(r.hbar_factor, r.traj_rms) for r in report.rows],
                TableSchema("sweep", (Column("hbar_factor"), Column("traj_rms", "length"))),
                out / "sweep.csv",
            )
        ]
        for f, res in results.items():
            paths.extend(
                _emit_double_slit(res, geometry, out, suffix=f"_f{f:.0e}")
            )
        return paths

    from .convergence import (
        LinearScenario,
        action_limit_check,
        trajectory_limit_check_linear,
    )

    scn = LinearScenario(
        mass=cfg["physics.mass"],
        force=cfg["physics.force"],
        v0=cfg["initial.v0"],
        center0=cfg["initial.center"],
        sigma0=cfg["initial.sigma"],
        hbar_ref=cfg["physics.hbar_ref"],
        t_final=cfg["time.final"],
        n_slices=cfg["time.slices"],
        halfwidth=cfg["grid.halfwidth"],
        n_nodes=cfg["grid.nodes"],
        n_particles=cfg["particles.n"],
        seed=cfg["run.seed"],
    )
    rep_a = action_limit_check(scn, factors)
    rep_t = trajectory_limit_check_linear(scn, factors)
    rows = [
        (
            ra.hbar_factor,
            ra.action_sup_err,
            ra.density_dist,
            rt.traj_rms,
            ra.resolution,
            ra.mask_coverage,
        )
        for ra, rt in zip(rep_a.rows, rep_t.rows)
    ]
    return [
        emit_table(
            rows,
            TableSchema(
                "sweep",
                (
                    Column("hbar_factor"),
                    Column("action_sup_err", "energy*time"),
                    Column("density_dist", "length"),
                    Column("traj_rms", "length"),
                    Column("resolution"),
                    Column("mask_coverage"),
                ),
            ),
            out / "sweep.csv",
        )
    ]


_RUNNERS = {
    "hopf-lax": run_hopf_lax,
    "el-action": run_el_action,
    "deterministic": run_deterministic,
    "schrod": run_schrod,
    "bohm": run_bohm,
    "double-slit": run_double_slit,
    "sweep-indiscerned": run_sweep,
    "sweep-coherent": run_sweep,
}


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hjflow",
        description="Min-plus Hamilton-Jacobi actions, Schrodinger/Bohm evolution "
        "and hbar->0 convergence experiments.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _SUBCOMMAND_KINDS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--config", type=Path, default=None, help="config file path")
        p.add_argument("--preset", type=str, default=None, help="packaged preset name")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config key (JSON value); repeatable",
        )
        p.add_argument("--out", type=Path, default=Path("runs") / name, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker threads for BLAS/FFT pools (set before numerics load)",
        )
    return parser


def _resolve_config(args) -> dict:
    base: dict = {}
    if args.preset:
        base.update(parse_config_text(load_preset_text(args.preset)))
    if args.config is not None:
        base.update(parse_config_file(args.config))
    if not args.preset and args.config is None:
        base.update(parse_config_text(load_preset_text(_default_preset(args.subcommand))))
    base = apply_overrides(base, args.overrides)
    if args.seed is not None:
        base["run.seed"] = args.seed

    kinds = _SUBCOMMAND_KINDS[args.subcommand]
    kind = base.get("scenario", kinds[0])
    if kind not in kinds:
        raise ConfigValidationError(
            f"scenario {kind!r} not runnable via subcommand {args.subcommand!r}"
        )
    base["scenario"] = kind
    return validate_config(base, SCHEMAS[kind])


def _default_preset(subcommand: str) -> str:
    return {"sweep": "sweep-indiscerned"}.get(subcommand, subcommand)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    try:
        cfg = _resolve_config(args)
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(subcommand=args.subcommand, config=cfg)
    started = time.monotonic()
    produced: list[Path] = []
    status, error, code = "ok", "", 0
    try:
        produced = _RUNNERS[cfg["scenario"]](cfg, out)
    except (ConfigValidationError, ValueError) as exc:
        status, error, code = "error", str(exc), EXIT_VALIDATION
    except HJFlowError as exc:
        status, error, code = "error", str(exc), EXIT_NUMERICAL
    except BaseException as exc:  # manifest still lands on unexpected crashes
        manifest.finalize(out, started, produced, "error", f"{type(exc).__name__}: {exc}")
        raise
    manifest.finalize(out, started, produced, status, error)
    if code:
        print(f"error: {error}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

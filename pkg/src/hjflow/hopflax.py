"""Hopf-Lax solver for Hamilton-Jacobi action fields.

The action field evolving from a regular initial action S0 is the
inf-convolution of S0 with the minimal-action kernel,

    S(x, t) = inf_{x0} { S0(x0) + S_cl(x, t; x0) },

the min-plus counterpart of convolving an initial condition with an
elementary solution.  Taking the pointwise inf already selects the viscosity
solution for these convex Lagrangians, so shocks need no extra treatment;
residual checks simply mask detected kinks.

Characteristics of the solved field (xdot = grad S / m) transport particle
ensembles; densities follow by weighted histogram with exact mass
bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .actions import LagrangianSpec, closed_action_kernel
from .errors import TemporalResolutionError
from .gridops import interp_linear
from .minplus import Grid, ScalarField, inf_convolution


@dataclass(frozen=True)
class ParticleEnsemble:
    """Weighted empirical measure: positions plus probability masses."""

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if len(pos) != len(w):
            raise ValueError("positions and weights must have equal length")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(float(np.sum(w)) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @staticmethod
    def uniform(positions) -> "ParticleEnsemble":
        positions = np.asarray(positions, dtype=float)
        n = len(positions)
        return ParticleEnsemble(positions, np.full(n, 1.0 / n))


@dataclass(frozen=True)
class TrajectoryBundle:
    """Time-indexed ensemble paths with validity flags.

    positions has shape (n_particles, n_times) in 1D or (n, n_times, 2) in
    2D; ``valid[i, k]`` is False once particle i escaped the grid or entered
    a masked region at or before time k (it is frozen, never re-injected).
    """

    times: np.ndarray
    positions: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        object.__setattr__(self, "valid", np.asarray(self.valid, dtype=bool))

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    def order_preserved(self) -> bool:
        """1D non-crossing check: sort order of always-valid particles."""
        if self.positions.ndim != 2:
            raise ValueError("order check applies to 1D bundles")
        alive = self.valid.all(axis=1)
        ref = np.argsort(self.positions[alive, 0], kind="stable")
        for k in range(1, len(self.times)):
            if not np.array_equal(np.argsort(self.positions[alive, k], kind="stable"), ref):
                return False
        return True


@dataclass(frozen=True)
class HJSolution:
    """Slices (t, S(.,t)) of one Hopf-Lax evolution, t=0 slice included."""

    spec: LagrangianSpec
    initial: ScalarField
    times: np.ndarray
    slices: tuple[ScalarField, ...]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if np.any(np.diff(t) <= 0):
            raise ValueError("slice times must be strictly increasing")
        if abs(t[0]) > 1e-15:
            raise ValueError("first slice must be t=0")
        if self.slices[0] is not self.initial and not np.array_equal(
            self.slices[0].values, self.initial.values
        ):
            raise ValueError("slice at t=0 must equal the initial action")
        object.__setattr__(self, "times", t)

    def slice_at(self, t: float) -> ScalarField:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise TemporalResolutionError(f"no slice at t={t}")
        return self.slices[k]


@dataclass(frozen=True)
class VectorField:
    grid: Grid
    components: tuple[np.ndarray, ...]
    mask: np.ndarray  # True where the gradient is defined


@dataclass(frozen=True)
class ResidualSlice:
    t: float
    values: np.ndarray
    mask: np.ndarray

    def masked_max(self) -> float:
        if not self.mask.any():
            return np.nan
        return float(np.max(np.abs(self.values[self.mask])))


@dataclass(frozen=True)
class DensitySlice:
    t: float
    field: ScalarField
    valid_mass: float
    escaped_mass: float


def hamilton_jacobi_field(
    spec: LagrangianSpec,
    s0: ScalarField,
    t: float,
    refine: bool = False,
    out_grid: Grid | None = None,
    kernel=None,
) -> ScalarField:
    """One Hopf-Lax step: S(., t) from the initial action S0.

    Closed-form kernels cover free/linear/harmonic specs; pass ``kernel``
    explicitly (callable or matrix) for anything else, e.g. a tabulated
    potential backed by el_action_numeric values.
    """
    if kernel is None:
        kernel = closed_action_kernel(spec, t, ndim=s0.grid.ndim)
    return inf_convolution(s0, kernel, out_grid=out_grid, refine=refine)


def solve_hj_slices(
    spec: LagrangianSpec,
    s0: ScalarField,
    times,
    refine: bool = False,
) -> HJSolution:
    """Hopf-Lax fields at the requested times (0 prepended if missing)."""
    times = np.asarray(times, dtype=float)
    if times[0] > 0:
        times = np.concatenate(([0.0], times))
    slices = [s0]
    for t in times[1:]:
        slices.append(hamilton_jacobi_field(spec, s0, float(t), refine=refine))
    return HJSolution(spec, s0, times, tuple(slices))


def velocity_field(s: ScalarField, m: float) -> VectorField:
    """v = grad S / m, centered differences inside, one-sided at boundaries.

    Nodes whose difference stencil touches +inf are masked out.
    """
    finite = np.isfinite(s.values)
    comps = []
    mask = finite.copy()
    vals = np.where(finite, s.values, np.nan)
    for ax in range(s.grid.ndim):
        comps.append(np.gradient(vals, s.grid.spacing[ax], axis=ax) / m)
    for ax in range(s.grid.ndim):
        fwd = np.roll(finite, -1, axis=ax)
        bwd = np.roll(finite, 1, axis=ax)
        # boundary rows fall back to one-sided stencils automatically
        edge_lo = np.zeros_like(finite)
        edge_hi = np.zeros_like(finite)
        sl_lo = [slice(None)] * s.grid.ndim
        sl_lo[ax] = 0
        sl_hi = [slice(None)] * s.grid.ndim
        sl_hi[ax] = -1
        edge_lo[tuple(sl_lo)] = True
        edge_hi[tuple(sl_hi)] = True
        mask &= (fwd | edge_hi) & (bwd | edge_lo)
    for c in comps:
        c[~mask] = np.nan
    return VectorField(s.grid, tuple(comps), mask)


def _potential_on_grid(spec: LagrangianSpec, grid: Grid) -> np.ndarray:
    pts = np.stack([mesh.ravel() for mesh in grid.meshes()], axis=-1)
    return spec.potential.energy(pts, spec.mass).reshape(grid.shape)


def kink_mask(s: ScalarField, factor: float = 10.0) -> np.ndarray:
    """True where the gradient jump is below ``factor`` x median jump."""
    ok = np.ones(s.grid.shape, dtype=bool)
    vals = s.values
    for ax in range(s.grid.ndim):
        v = np.moveaxis(vals, ax, 0)
        jump = np.full(v.shape, 0.0)
        jump[1:-1] = np.abs(v[2:] - 2.0 * v[1:-1] + v[:-2]) / s.grid.spacing[ax]
        jump = np.moveaxis(jump, 0, ax)
        finite_jumps = jump[np.isfinite(jump)]
        if finite_jumps.size == 0:
            continue
        med = float(np.median(finite_jumps))
        threshold = factor * med if med > 0 else factor * float(
            np.mean(finite_jumps) + 1e-300
        )
        with np.errstate(invalid="ignore"):
            ok &= ~(jump > threshold)
    return ok


def hj_residual(solution: HJSolution, probe_times) -> list[ResidualSlice]:
    """R = dS/dt + |grad S|^2 / 2m + V at interior slices.

    dS/dt uses the bracketing slices; the reported mask excludes boundary
    rings, +inf-adjacent nodes and detected kinks.
    """
    out = []
    times = solution.times
    for t in np.atleast_1d(np.asarray(probe_times, dtype=float)):
        k = int(np.argmin(np.abs(times - t)))
        if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)) or k == 0 or k == len(times) - 1:
            raise TemporalResolutionError(
                f"probe t={t} needs an interior slice with both neighbours"
            )
        s_prev, s_here, s_next = (solution.slices[k + d] for d in (-1, 0, 1))
        grid = s_here.grid
        st = (s_next.values - s_prev.values) / (times[k + 1] - times[k - 1])
        vf = velocity_field(s_here, 1.0)  # raw gradient (m=1)
        grad_sq = sum(c * c for c in vf.components)
        V = _potential_on_grid(solution.spec, grid)
        vals = st + grad_sq / (2.0 * solution.spec.mass) + V

        mask = (
            vf.mask
            & np.isfinite(st)
            & np.isfinite(s_prev.values)
            & np.isfinite(s_next.values)
            & kink_mask(s_here)
        )
        for ax in range(grid.ndim):
            sl = [slice(None)] * grid.ndim
            sl[ax] = 0
            mask[tuple(sl)] = False
            sl[ax] = -1
            mask[tuple(sl)] = False
        vals = np.where(mask, vals, np.nan)
        out.append(ResidualSlice(float(times[k]), vals, mask))
    return out


def advect_ensemble(
    spec: LagrangianSpec,
    s0: ScalarField,
    ensemble0: ParticleEnsemble,
    t_end: float,
    dt: float,
    refine: bool = False,
    substeps: int = 1,
) -> tuple[TrajectoryBundle, list[DensitySlice]]:
    """Transport an ensemble along characteristics xdot = grad S(x, t) / m.

    The field is re-solved per slice; particles integrate with RK4 using
    bilinear space interpolation and linear time interpolation between
    slices.  Escaped particles keep their weight in the escaped-mass ledger:
    valid mass + escaped mass stays 1.
    """
    n_slices = max(1, int(round(t_end / dt)))
    times = np.linspace(0.0, t_end, n_slices + 1)
    solution = solve_hj_slices(spec, s0, times, refine=refine)
    vfields = [velocity_field(s, spec.mass) for s in solution.slices]
    grid = s0.grid

    pos = np.atleast_1d(ensemble0.positions).astype(float)
    if grid.ndim == 1 and pos.ndim != 1:
        raise ValueError("1D grid requires 1D particle positions")
    alive = np.ones(len(pos), dtype=bool)

    all_pos = np.empty((len(pos), len(times)) + pos.shape[1:])
    all_valid = np.empty((len(pos), len(times)), dtype=bool)

    def sample_velocity(p, k0, k1, w):
        """Velocity at positions p, time interpolated between slices k0, k1."""
        if grid.ndim == 1:
            v0 = interp_linear(grid, vfields[k0].components[0], p)
            v1 = interp_linear(grid, vfields[k1].components[0], p)
            return (1 - w) * v0 + w * v1
        comps = []
        for ax in range(2):
            v0 = interp_linear(grid, vfields[k0].components[ax], p)
            v1 = interp_linear(grid, vfields[k1].components[ax], p)
            comps.append((1 - w) * v0 + w * v1)
        return np.stack(comps, axis=-1)

    all_pos[:, 0] = pos
    all_valid[:, 0] = alive
    for k in range(n_slices):
        h_slice = times[k + 1] - times[k]
        h = h_slice / substeps
        for j in range(substeps):
            tau0 = j / substeps
            p = pos[alive]
            if p.size:
                k1 = sample_velocity(p, k, k + 1, tau0)
                k2 = sample_velocity(p + 0.5 * h * k1, k, k + 1, tau0 + 0.5 / substeps)
                k3 = sample_velocity(p + 0.5 * h * k2, k, k + 1, tau0 + 0.5 / substeps)
                k4 = sample_velocity(p + h * k3, k, k + 1, tau0 + 1.0 / substeps)
                step = (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                bad = ~np.isfinite(step if grid.ndim == 1 else step.sum(axis=-1))
                newp = p + np.where(np.isfinite(step), step, 0.0)
                idx = np.nonzero(alive)[0]
                pos[idx] = newp
                if bad.any():
                    alive[idx[bad]] = False
        # escape check: a step may land outside even though its samples were inside
        inside = np.ones(len(pos), dtype=bool)
        for ax in range(grid.ndim):
            lo, hi = grid.bounds(ax)
            coord = pos if grid.ndim == 1 else pos[:, ax]
            inside &= (coord >= lo) & (coord <= hi)
        alive &= inside
        all_pos[:, k + 1] = pos
        all_valid[:, k + 1] = alive

    bundle = TrajectoryBundle(times, all_pos, all_valid)

    densities = []
    w = ensemble0.weights
    cell = float(np.prod(grid.spacing))
    for k in range(len(times)):
        ok = all_valid[:, k]
        vals = np.zeros(grid.shape)
        if ok.any():
            if grid.ndim == 1:
                edges = np.concatenate(
                    [grid.axis(0) - grid.spacing[0] / 2, [grid.bounds(0)[1] + grid.spacing[0] / 2]]
                )
                hist, _ = np.histogram(all_pos[ok, k], bins=edges, weights=w[ok])
                vals = hist / cell
            else:
                e0 = np.concatenate(
                    [grid.axis(0) - grid.spacing[0] / 2, [grid.bounds(0)[1] + grid.spacing[0] / 2]]
                )
                e1 = np.concatenate(
                    [grid.axis(1) - grid.spacing[1] / 2, [grid.bounds(1)[1] + grid.spacing[1] / 2]]
                )
                hist, _, _ = np.histogram2d(
                    all_pos[ok, k, 0], all_pos[ok, k, 1], bins=(e0, e1), weights=w[ok]
                )
                vals = hist / cell
        densities.append(
            DensitySlice(
                float(times[k]),
                ScalarField(grid, vals),
                valid_mass=float(np.sum(w[ok])),
                escaped_mass=float(np.sum(w[~ok])),
            )
        )
    return bundle, densities

"""Schrodinger evolution with adjustable hbar, Madelung decomposition and
coherent states.

Solvers: a Strang split-step spectral stepper (second order in dt, periodic
grid) and a propagator route for quadratic Lagrangians that integrates
exp(i S_cl / hbar) against the initial state.  Madelung decomposition writes
psi = sqrt(rho) exp(i S / hbar) with the phase unwrapped per connected
region of usable density; the quantum potential

    Q = -(hbar^2 / 2m) lap(sqrt(rho)) / sqrt(rho)

is exposed for residual diagnostics.

Coherent states: for the isotropic harmonic oscillator in d dimensions with
sigma^2 = hbar / (2 m w),

    rho(x, t) = (2 pi sigma^2)^(-d/2) exp(-|x - xi(t)|^2 / (2 sigma^2))
    S(x, t)   = m xi'(t).x + g(t) - d hbar w t / 2,

where xi(t) is the classical trajectory from (x0, v0) and g accumulates per
the deterministic-action rule.  The zero-point term is d hbar w t / 2: one
half-quantum per axis (so the 2D oscillator carries exactly -hbar w t).
This is validated against split-step evolution in the test suite.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

from .actions import (
    HarmonicPotential,
    LagrangianSpec,
    closed_action_kernel,
    deterministic_action,
)
from .errors import (
    BoundaryBreachError,
    DegenerateStateError,
    InvalidHorizonError,
    ResolutionError,
)
from .gridops import second_diff_axis, trapezoid_mass
from .minplus import Grid, INF, ScalarField


@dataclass(frozen=True)
class WaveFunction:
    """Complex amplitudes on a uniform grid with attached hbar and mass."""

    grid: Grid
    psi: np.ndarray
    hbar: float
    mass: float

    def __post_init__(self):
        if self.hbar <= 0 or self.mass <= 0:
            raise ValueError("hbar and mass must be positive")
        psi = np.asarray(self.psi, dtype=complex)
        if psi.shape != self.grid.shape:
            raise ValueError("psi shape must match the grid")
        object.__setattr__(self, "psi", psi)
        psi.setflags(write=False)

    @property
    def cell(self) -> float:
        return float(np.prod(self.grid.spacing))

    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    def norm(self) -> float:
        return math.sqrt(float(np.sum(self.density())) * self.cell)

    def normalized(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.psi / self.norm(), self.hbar, self.mass)

    def inner(self, other: "WaveFunction") -> complex:
        return complex(np.sum(np.conj(self.psi) * other.psi) * self.cell)


def gaussian_packet(grid: Grid, center, sigma: float, velocity, hbar: float, mass: float) -> WaveFunction:
    """Normalized Gaussian with plane phase exp(i m v.x / hbar)."""
    meshes = grid.meshes()
    c = np.atleast_1d(np.asarray(center, dtype=float))
    v = np.atleast_1d(np.asarray(velocity, dtype=float))
    r2 = sum((meshes[k] - c[k]) ** 2 for k in range(grid.ndim))
    phase = sum(mass * v[k] * meshes[k] for k in range(grid.ndim)) / hbar
    psi = np.exp(-r2 / (4.0 * sigma**2) + 1j * phase)
    return WaveFunction(grid, psi, hbar, mass).normalized()


def potential_on_grid(potential, grid: Grid, mass: float) -> np.ndarray:
    pts = np.stack([mesh.ravel() for mesh in grid.meshes()], axis=-1)
    return np.asarray(potential.energy(pts, mass), dtype=float).reshape(grid.shape)


def edge_mass(psi: WaveFunction, fraction: float = 0.05) -> float:
    """Probability mass in the outer band of the grid (boundary monitor)."""
    rho = psi.density()
    mask = np.zeros(psi.grid.shape, dtype=bool)
    for ax in range(psi.grid.ndim):
        band = max(2, int(round(fraction * psi.grid.shape[ax])))
        sl = [slice(None)] * psi.grid.ndim
        sl[ax] = slice(0, band)
        mask[tuple(sl)] = True
        sl[ax] = slice(-band, None)
        mask[tuple(sl)] = True
    return float(np.sum(rho[mask])) * psi.cell


class _SplitStepper:
    """Strang splitting exp(-iVdt/2h) exp(-ihk^2dt/2m) exp(-iVdt/2h)."""

    def __init__(self, psi: WaveFunction, potential, dt: float):
        if dt <= 0:
            raise InvalidHorizonError("dt must be positive")
        grid = psi.grid
        self.v = (
            potential
            if isinstance(potential, np.ndarray)
            else potential_on_grid(potential, grid, psi.mass)
        )
        vmax = float(np.max(np.abs(self.v)))
        if dt * vmax / psi.hbar >= 0.5:
            raise ResolutionError(
                f"dt*max|V|/hbar = {dt * vmax / psi.hbar:.3f} >= 0.5: "
                "time step does not resolve the potential phase rotation",
                required=0.5 * psi.hbar / vmax if vmax > 0 else None,
            )
        ks = [
            2.0 * np.pi * np.fft.fftfreq(grid.shape[ax], d=grid.spacing[ax])
            for ax in range(grid.ndim)
        ]
        kk = ks[0] ** 2 if grid.ndim == 1 else (
            ks[0][:, None] ** 2 + ks[1][None, :] ** 2
        )
        self.exp_v_half = np.exp(-0.5j * self.v * dt / psi.hbar)
        self.exp_k = np.exp(-0.5j * psi.hbar * kk * dt / psi.mass)

    def step(self, arr: np.ndarray) -> np.ndarray:
        arr = self.exp_v_half * arr
        arr = np.fft.ifftn(self.exp_k * np.fft.fftn(arr))
        return self.exp_v_half * arr


def _check_boundary(psi: WaveFunction, warn_at: float, error_at: float):
    em = edge_mass(psi)
    if em > error_at:
        raise BoundaryBreachError(
            f"boundary mass {em:.3e} exceeds {error_at:.1e}: enlarge the grid"
        )
    if em > warn_at:
        warnings.warn(
            f"boundary mass {em:.3e} above {warn_at:.1e}; reflections may bias the run",
            stacklevel=3,
        )


def split_step_evolve(
    psi: WaveFunction,
    potential,
    dt: float,
    n_steps: int,
    boundary_warn: float = 1e-8,
    boundary_error: float = 1e-4,
) -> WaveFunction:
    """Evolve n_steps of size dt; zero steps returns the state unchanged."""
    if n_steps == 0:
        return psi
    stepper = _SplitStepper(psi, potential, dt)
    arr = psi.psi.copy()
    for _ in range(n_steps):
        arr = stepper.step(arr)
    out = WaveFunction(psi.grid, arr, psi.hbar, psi.mass)
    _check_boundary(out, boundary_warn, boundary_error)
    return out


def split_step_slices(
    psi: WaveFunction,
    potential,
    dt: float,
    n_steps: int,
    record_every: int = 1,
    boundary_warn: float = 1e-8,
    boundary_error: float = 1e-4,
) -> list[tuple[float, WaveFunction]]:
    """Evolve while recording (t, state) every ``record_every`` steps."""
    stepper = _SplitStepper(psi, potential, dt) if n_steps else None
    slices = [(0.0, psi)]
    arr = psi.psi.copy()
    for i in range(1, n_steps + 1):
        arr = stepper.step(arr)
        if i % record_every == 0 or i == n_steps:
            state = WaveFunction(psi.grid, arr.copy(), psi.hbar, psi.mass)
            slices.append((i * dt, state))
    if n_steps:
        _check_boundary(slices[-1][1], boundary_warn, boundary_error)
    return slices


def free_evolve(psi: WaveFunction, t: float) -> WaveFunction:
    """Exact free evolution: one spectral kinetic step to any horizon."""
    grid = psi.grid
    ks = [
        2.0 * np.pi * np.fft.fftfreq(grid.shape[ax], d=grid.spacing[ax])
        for ax in range(grid.ndim)
    ]
    kk = ks[0] ** 2 if grid.ndim == 1 else ks[0][:, None] ** 2 + ks[1][None, :] ** 2
    arr = np.fft.ifftn(np.exp(-0.5j * psi.hbar * kk * t / psi.mass) * np.fft.fftn(psi.psi))
    return WaveFunction(grid, arr, psi.hbar, psi.mass)


# ---------------------------------------------------------------------------
# propagator route for quadratic Lagrangians
# ---------------------------------------------------------------------------

def feynman_propagate(psi0: WaveFunction, spec: LagrangianSpec, t: float) -> WaveFunction:
    """Integrate exp(i S_cl(x, t; x0)/hbar) psi0(x0) dx0 and renormalize.

    The x- and x0-independent prefactor is fixed post hoc by unit L2 norm;
    its phase is left free (it affects neither densities nor phase
    gradients), so comparisons against other solvers should use the
    phase-aligned L2 distance.
    """
    if t <= 0:
        raise InvalidHorizonError("propagation time must be positive")
    grid = psi0.grid
    kernel = closed_action_kernel(spec, t, ndim=grid.ndim)
    hbar = psi0.hbar

    # the quadrature-critical oscillation lives where the initial state has
    # support (kernel phase against far-away output points only shapes
    # exponentially small tails); measure the per-cell phase change there
    amp = np.abs(psi0.psi)
    support = amp >= 1e-8 * float(amp.max())

    def axis_matrix(ax):
        x = grid.axis(ax)
        proj = support if grid.ndim == 1 else support.any(axis=1 - ax)
        idx = np.nonzero(proj)[0]
        lo, hi = int(idx[0]), int(idx[-1])
        s = kernel.eval_axis(ax, x[:, None], x[None, :])
        worst = float(np.max(np.abs(np.diff(s[lo : hi + 1, lo : hi + 1], axis=1)))) / hbar
        if worst > np.pi / 4:
            raise ResolutionError(
                f"phase change per cell {worst:.2f} rad exceeds pi/4 along axis {ax}; "
                "refine the grid or shorten t",
                required=int(math.ceil(grid.shape[ax] * worst / (np.pi / 4))),
            )
        return np.exp(1j * s / hbar)

    if grid.ndim == 1:
        out = axis_matrix(0) @ psi0.psi
    else:
        out = axis_matrix(0) @ psi0.psi @ axis_matrix(1).T
    return WaveFunction(grid, out, hbar, psi0.mass).normalized()


def phase_aligned_l2(a: WaveFunction, b: WaveFunction) -> float:
    """min over global phase of ||a - e^{i theta} b||_2 for normalized states.

    Evaluated on the aligned difference vector rather than via
    sqrt(2 - 2|<a,b>|), which loses precision once the states agree to
    better than ~1e-8.
    """
    an, bn = a.normalized(), b.normalized()
    ov = an.inner(bn)  # <a, b>; the optimal rotation of b is conj(ov)/|ov|
    phase = np.conj(ov) / abs(ov) if abs(ov) > 0 else 1.0
    return math.sqrt(float(np.sum(np.abs(an.psi - phase * bn.psi) ** 2)) * an.cell)


def l2_distance(a: WaveFunction, b: WaveFunction) -> float:
    return math.sqrt(float(np.sum(np.abs(a.psi - b.psi) ** 2)) * a.cell)


# ---------------------------------------------------------------------------
# Madelung decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MadelungPair:
    """Polar form psi = sqrt(rho) exp(i S / hbar) on the usable mask.

    S is +inf outside the mask (the field convention for "undefined"), and
    is unwrapped independently on each connected masked region, so each
    region carries an arbitrary 2 pi hbar branch constant.
    """

    rho: ScalarField
    s: ScalarField
    mask: np.ndarray
    hbar: float
    mass: float

    def recompose(self) -> np.ndarray:
        """sqrt(rho) exp(iS/hbar) with zeros off the mask."""
        vals = np.where(self.mask, np.sqrt(self.rho.values), 0.0)
        phase = np.where(self.mask, self.s.values / self.hbar, 0.0)
        return vals * np.exp(1j * phase)


def _unwrap_region_1d(theta, rho, idx_list, out):
    seed = idx_list[int(np.argmax(rho[idx_list]))]
    out[seed] = theta[seed]
    for i in range(seed + 1, idx_list[-1] + 1):
        d = theta[i] - theta[i - 1]
        out[i] = out[i - 1] + d - 2.0 * np.pi * np.round(d / (2.0 * np.pi))
    for i in range(seed - 1, idx_list[0] - 1, -1):
        d = theta[i] - theta[i + 1]
        out[i] = out[i + 1] + d - 2.0 * np.pi * np.round(d / (2.0 * np.pi))


def _unwrap_region_2d(theta, rho, mask, out):
    """Flood-fill unwrap of the component holding the mask's max-rho node."""
    visited = np.zeros_like(mask)
    flat_order = np.argsort(-rho[mask])
    coords = np.argwhere(mask)
    start = tuple(coords[flat_order[0]])
    out[start] = theta[start]
    visited[start] = True
    q = deque([start])
    shape = mask.shape
    while q:
        ci, cj = q.popleft()
        for ni, nj in ((ci - 1, cj), (ci + 1, cj), (ci, cj - 1), (ci, cj + 1)):
            if 0 <= ni < shape[0] and 0 <= nj < shape[1] and mask[ni, nj] and not visited[ni, nj]:
                d = theta[ni, nj] - out[ci, cj]
                out[ni, nj] = theta[ni, nj] - 2.0 * np.pi * np.round(d / (2.0 * np.pi))
                visited[ni, nj] = True
                q.append((ni, nj))
    return visited


def madelung_decompose(psi: WaveFunction, mask_eps: float = 1e-6) -> MadelungPair:
    """rho = |psi|^2 and S = hbar * unwrapped phase where rho is usable.

    The mask keeps nodes with rho >= mask_eps * max(rho).  Unwrapping starts
    at the highest-density node of each connected masked region and walks
    outward correcting 2 pi jumps.
    """
    rho = psi.density()
    peak = float(rho.max())
    if peak <= 0.0:
        raise DegenerateStateError("state carries no probability mass")
    mask = rho >= mask_eps * peak
    if not mask.any():
        raise DegenerateStateError("density mask is empty")
    theta = np.angle(psi.psi)
    s_vals = np.full(psi.grid.shape, INF)

    if psi.grid.ndim == 1:
        idx = np.nonzero(mask)[0]
        splits = np.nonzero(np.diff(idx) > 1)[0] + 1
        unwrapped = np.empty_like(theta)
        for region in np.split(idx, splits):
            _unwrap_region_1d(theta, rho, region, unwrapped)
        s_vals[mask] = psi.hbar * unwrapped[mask]
    else:
        unwrapped = np.empty_like(theta)
        remaining = mask.copy()
        while remaining.any():
            visited = _unwrap_region_2d(theta, rho, remaining, unwrapped)
            remaining &= ~visited
        s_vals[mask] = psi.hbar * unwrapped[mask]

    return MadelungPair(
        ScalarField(psi.grid, rho),
        ScalarField(psi.grid, s_vals),
        mask,
        psi.hbar,
        psi.mass,
    )


def quantum_potential(pair: MadelungPair, hbar: float | None = None, m: float | None = None) -> ScalarField:
    """Q = -(hbar^2/2m) lap(sqrt(rho))/sqrt(rho) on masked interior nodes."""
    hbar = pair.hbar if hbar is None else hbar
    m = pair.mass if m is None else m
    grid = pair.rho.grid
    amp = np.sqrt(pair.rho.values)
    lap = np.zeros(grid.shape)
    ok = pair.mask.copy()
    for ax in range(grid.ndim):
        d2 = second_diff_axis(amp, grid.spacing[ax], ax)
        lap = lap + np.where(np.isfinite(d2), d2, np.nan)
        ok &= np.roll(pair.mask, 1, axis=ax) & np.roll(pair.mask, -1, axis=ax)
        sl = [slice(None)] * grid.ndim
        sl[ax] = 0
        ok[tuple(sl)] = False
        sl[ax] = -1
        ok[tuple(sl)] = False
    q = np.full(grid.shape, INF)
    with np.errstate(invalid="ignore", divide="ignore"):
        q[ok] = -(hbar**2) / (2.0 * m) * lap[ok] / amp[ok]
    return ScalarField(grid, q)


def madelung_residuals(
    pairs: tuple[MadelungPair, MadelungPair, MadelungPair],
    times: tuple[float, float, float],
    potential,
):
    """Finite-difference residuals of the polar-form evolution equations.

    Returns (hj_residual, continuity_residual, mask) at the middle time:
        R_S   = S_t + |grad S|^2/(2m) + V + Q
        R_rho = rho_t + div(rho grad S / m)
    """
    prev, here, nxt = pairs
    t0, t1, t2 = times
    grid = here.rho.grid
    m = here.mass

    with np.errstate(invalid="ignore"):  # +inf - +inf off the mask
        st = (nxt.s.values - prev.s.values) / (t2 - t0)
    rt = (nxt.rho.values - prev.rho.values) / (t2 - t0)
    mask = prev.mask & here.mask & nxt.mask

    grads = [np.gradient(np.where(here.mask, here.s.values, np.nan), grid.spacing[ax], axis=ax)
             for ax in range(grid.ndim)]
    v = potential_on_grid(potential, grid, m)
    qf = quantum_potential(here)
    r_s = st + sum(g * g for g in grads) / (2.0 * m) + v + np.where(np.isfinite(qf.values), qf.values, np.nan)

    flux_div = np.zeros(grid.shape)
    for ax in range(grid.ndim):
        flux = here.rho.values * grads[ax] / m
        flux_div += np.gradient(flux, grid.spacing[ax], axis=ax)
    r_rho = rt + flux_div

    mask &= np.isfinite(r_s) & np.isfinite(r_rho) & np.isfinite(qf.values)
    for ax in range(grid.ndim):
        roll_ok = np.roll(mask, 2, axis=ax) & np.roll(mask, -2, axis=ax)
        mask &= roll_ok
    return np.where(mask, r_s, np.nan), np.where(mask, r_rho, np.nan), mask


# ---------------------------------------------------------------------------
# coherent states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoherentStateParams:
    """Harmonic-oscillator coherent state: center follows the classical
    trajectory from (x0, v0); width sigma = sqrt(hbar / 2 m w) never
    spreads."""

    mass: float
    omega: float
    x0: tuple[float, ...]
    v0: tuple[float, ...]
    hbar: float

    def __post_init__(self):
        if min(self.mass, self.omega, self.hbar) <= 0:
            raise ValueError("mass, omega and hbar must be positive")
        object.__setattr__(self, "x0", tuple(float(v) for v in np.atleast_1d(self.x0)))
        object.__setattr__(self, "v0", tuple(float(v) for v in np.atleast_1d(self.v0)))
        if len(self.x0) != len(self.v0):
            raise ValueError("x0 and v0 must have the same dimension")

    @property
    def ndim(self) -> int:
        return len(self.x0)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.hbar / (2.0 * self.mass * self.omega))

    @property
    def spec(self) -> LagrangianSpec:
        return LagrangianSpec(self.mass, HarmonicPotential(self.omega))

    def default_grid(self, nodes: int = 512, pad_sigmas: float = 14.0) -> Grid:
        amps = [
            math.sqrt(x * x + (v / self.omega) ** 2) + pad_sigmas * self.sigma
            for x, v in zip(self.x0, self.v0)
        ]
        if self.ndim == 1:
            return Grid.regular(-amps[0], amps[0], nodes)
        return Grid.regular2d([-a for a in amps], amps, [nodes] * self.ndim)


def classical_ho_motion(params: CoherentStateParams, t: float, dt: float = 1e-3):
    """(xi, xi', g) at time t from the deterministic-action integration."""
    if t == 0.0:
        return (
            np.asarray(params.x0, dtype=float),
            np.asarray(params.v0, dtype=float),
            0.0,
        )
    det = deterministic_action(params.spec, params.x0, params.v0, t, dt)
    return det.xi_at(t), det.velocity_at(t), det.g_at(t)


def coherent_state(
    params: CoherentStateParams,
    t: float,
    grid: Grid | None = None,
    nodes: int = 512,
    xi_dt: float = 1e-3,
) -> tuple[WaveFunction, MadelungPair]:
    """Analytic coherent state at time t plus its polar form.

    The wavefunction is numerically normalized on the grid; the MadelungPair
    carries the analytic density and action (S includes the per-axis
    zero-point term -d hbar w t / 2).
    """
    grid = grid or params.default_grid(nodes)
    if grid.ndim != params.ndim:
        raise ValueError("grid dimension must match params dimension")
    xi, xip, g = classical_ho_motion(params, t, xi_dt)
    sig2 = params.sigma**2
    meshes = grid.meshes()
    r2 = sum((meshes[k] - xi[k]) ** 2 for k in range(grid.ndim))
    rho = (2.0 * np.pi * sig2) ** (-params.ndim / 2.0) * np.exp(-r2 / (2.0 * sig2))
    s_vals = (
        params.mass * sum(xip[k] * meshes[k] for k in range(grid.ndim))
        + g
        - params.ndim * params.hbar * params.omega * t / 2.0
    )
    psi = WaveFunction(
        grid, np.sqrt(rho) * np.exp(1j * s_vals / params.hbar), params.hbar, params.mass
    ).normalized()
    mask = rho >= 1e-6 * float(rho.max())
    pair = MadelungPair(
        ScalarField(grid, rho),
        ScalarField(grid, np.where(mask, s_vals, INF)),
        mask,
        params.hbar,
        params.mass,
    )
    return psi, pair


def moments(psi: WaveFunction, axis: int = 0) -> tuple[float, float]:
    """(mean, variance) of the density along one axis, grid quadrature."""
    rho = psi.density()
    x = psi.grid.axis(axis)
    if psi.grid.ndim == 2:
        rho = rho.sum(axis=1 - axis) * psi.grid.spacing[1 - axis]
    total = float(np.sum(rho)) * psi.grid.spacing[axis]
    mean = float(np.sum(x * rho)) * psi.grid.spacing[axis] / total
    var = float(np.sum((x - mean) ** 2 * rho)) * psi.grid.spacing[axis] / total
    return mean, var

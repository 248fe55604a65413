"""Bohmian trajectories: quantum-equilibrium sampling, guidance-equation
integration, equivariance statistics and the double-slit scenario.

Particles start distributed as |psi_0|^2 and follow

    dX/dt = (hbar/m) Im(grad psi / psi) at x = X(t),

which equals grad S / m wherever the density is usable and needs no phase
unwrapping.  In 1D the velocity field is single-valued, so trajectories
never cross; equivariance (X(t) stays |psi(.,t)|^2-distributed) is checked
with Kolmogorov-Smirnov statistics per slice.

The double slit uses the standard reduced model: a 1D transverse
wavefunction evolving freely while the longitudinal motion advances at
constant speed, so time maps linearly to screen distance.  Geometry defaults
live in DoubleSlitGeometry and the packaged preset file.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResolutionError, SamplingError, StatisticalPowerError
from .gridops import interp_linear
from .hopflax import TrajectoryBundle
from .minplus import Grid
from .quantum import WaveFunction, gaussian_packet, split_step_slices


@dataclass(frozen=True)
class BohmConfig:
    """Controls for a guidance-equation run."""

    n_particles: int
    seed: int
    dt: float
    mask_eps: float = 1e-6
    scenario: str = ""

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


def sample_quantum_equilibrium(psi0: WaveFunction, n: int, seed: int) -> np.ndarray:
    """n i.i.d. draws from |psi0|^2, deterministic for a given seed.

    1D: inverse CDF over node-centered cells with uniform jitter inside the
    cell.  2D: sample the axis-0 marginal cell, then the conditional cell
    along axis 1.  Returns shape (n,) or (n, 2).
    """
    rho = psi0.density()
    if float(rho.max()) <= 0 or not np.isfinite(rho).all():
        raise SamplingError("density unusable for sampling")
    rng = np.random.default_rng(seed)
    grid = psi0.grid

    if grid.ndim == 1:
        return _sample_cells_1d(grid.axis(0), rho, n, rng, grid)

    masses0 = rho.sum(axis=1)
    total = float(masses0.sum())
    if total <= 0:
        raise SamplingError("density unusable for sampling")
    cum0 = np.cumsum(masses0) / total
    u0 = rng.random(n)
    rows = np.searchsorted(cum0, u0, side="right").clip(0, grid.shape[0] - 1)
    x0 = grid.axis(0)[rows] + grid.spacing[0] * (rng.random(n) - 0.5)
    x1 = np.empty(n)
    ax1 = grid.axis(1)
    for r in np.unique(rows):
        sel = rows == r
        x1[sel] = _sample_cells_1d(ax1, rho[r], int(sel.sum()), rng, grid, axis=1)
    lo0, hi0 = grid.bounds(0)
    lo1, hi1 = grid.bounds(1)
    return np.stack([np.clip(x0, lo0, hi0), np.clip(x1, lo1, hi1)], axis=1)


def _sample_cells_1d(axis_nodes, masses, n, rng, grid, axis: int = 0):
    total = float(masses.sum())
    if total <= 0:
        raise SamplingError("density unusable for sampling")
    cum = np.cumsum(masses) / total
    u = rng.random(n)
    idx = np.searchsorted(cum, u, side="right").clip(0, len(axis_nodes) - 1)
    pos = axis_nodes[idx] + grid.spacing[axis] * (rng.random(n) - 0.5)
    lo, hi = grid.bounds(axis)
    return np.clip(pos, lo, hi)


def bohm_velocity_grid(psi: WaveFunction, mask_eps: float = 1e-6):
    """(hbar/m) Im(grad psi / psi) per axis; NaN where rho is below the mask.

    The gradient is spectral (the states live on the solver's periodic
    grid), so for smooth packets the node velocities are exact to rounding;
    centered differences would leave O(h^2) phase bias that the rigid
    transport and equivariance tolerances cannot absorb.
    """
    rho = psi.density()
    mask = rho >= mask_eps * float(rho.max())
    comps = []
    for ax in range(psi.grid.ndim):
        k = 2.0 * np.pi * np.fft.fftfreq(psi.grid.shape[ax], d=psi.grid.spacing[ax])
        shape = [1] * psi.grid.ndim
        shape[ax] = -1
        dpsi = np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(psi.psi, axis=ax), axis=ax)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            v = (psi.hbar / psi.mass) * np.imag(dpsi / psi.psi)
        v[~mask] = np.nan
        comps.append(v)
    return comps, mask


def integrate_bohm(
    slices: list[tuple[float, WaveFunction]],
    x0: np.ndarray,
    dt: float,
    mask_eps: float = 1e-6,
    max_cells_per_slice: float = 2.0,
) -> TrajectoryBundle:
    """RK4 guidance integration against recorded wavefunction slices.

    Velocities interpolate bilinearly in space and linearly in time between
    slices.  Slices must resolve the flow: no particle may move more than
    ``max_cells_per_slice`` grid cells per slice interval (checked on the
    actual displacements; field velocities can spike harmlessly near density
    nodes that carry no particles).  Particles reaching masked or exterior
    regions are frozen and flagged, never re-injected.
    """
    times = np.array([t for t, _ in slices], dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("slice times must be strictly increasing")
    grid = slices[0][1].grid
    vgrids = []
    for _, wf in slices:
        comps, _ = bohm_velocity_grid(wf, mask_eps)
        vgrids.append(comps)

    pos = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    if grid.ndim == 2 and pos.ndim != 2:
        raise ValueError("2D slices require (n, 2) initial positions")
    n = pos.shape[0]
    alive = np.ones(n, dtype=bool)
    all_pos = np.empty((n, len(times)) + pos.shape[1:])
    all_valid = np.empty((n, len(times)), dtype=bool)
    all_pos[:, 0] = pos
    all_valid[:, 0] = alive

    def velocity(p, k, w):
        if grid.ndim == 1:
            v0 = interp_linear(grid, vgrids[k][0], p)
            v1 = interp_linear(grid, vgrids[k + 1][0], p)
            return (1 - w) * v0 + w * v1
        comps = []
        for ax in range(2):
            v0 = interp_linear(grid, vgrids[k][ax], p)
            v1 = interp_linear(grid, vgrids[k + 1][ax], p)
            comps.append((1 - w) * v0 + w * v1)
        return np.stack(comps, axis=-1)

    worst_cells = 0.0
    for k in range(len(times) - 1):
        span = times[k + 1] - times[k]
        nsub = max(1, int(np.ceil(span / dt)))
        h = span / nsub
        for j in range(nsub):
            w0 = j / nsub
            p = pos[alive]
            if not p.size:
                break
            k1 = velocity(p, k, w0)
            k2 = velocity(p + 0.5 * h * k1, k, w0 + 0.5 / nsub)
            k3 = velocity(p + 0.5 * h * k2, k, w0 + 0.5 / nsub)
            k4 = velocity(p + h * k3, k, w0 + 1.0 / nsub)
            step = (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            finite = np.isfinite(step) if grid.ndim == 1 else np.isfinite(step).all(axis=1)
            idx = np.nonzero(alive)[0]
            pos[idx[finite]] = p[finite] + step[finite]
            alive[idx[~finite]] = False
        inside = np.ones(n, dtype=bool)
        for ax in range(grid.ndim):
            lo, hi = grid.bounds(ax)
            coord = pos if grid.ndim == 1 else pos[:, ax]
            inside &= (coord >= lo) & (coord <= hi)
        alive &= inside
        all_pos[:, k + 1] = pos
        all_valid[:, k + 1] = alive
        moved = all_pos[alive, k + 1] - all_pos[alive, k]
        if moved.size:
            dist = np.abs(moved) if grid.ndim == 1 else np.linalg.norm(moved, axis=1)
            worst_cells = max(worst_cells, float(np.max(dist)) / min(grid.spacing))
    if worst_cells > max_cells_per_slice:
        raise ResolutionError(
            f"particles moved up to {worst_cells:.2f} cells per slice "
            f"(limit {max_cells_per_slice}); record slices more often",
            required=worst_cells / max_cells_per_slice,
        )
    return TrajectoryBundle(times, all_pos, all_valid)


# ---------------------------------------------------------------------------
# equivariance
# ---------------------------------------------------------------------------

def _grid_cdf(grid: Grid, masses: np.ndarray, axis: int = 0):
    nodes = grid.axis(axis)
    h = grid.spacing[axis]
    edges = np.concatenate([nodes - h / 2, [nodes[-1] + h / 2]])
    cum = np.concatenate([[0.0], np.cumsum(masses)])
    cum /= cum[-1]
    return edges, cum


def ks_statistic(samples: np.ndarray, edges: np.ndarray, cdf_at_edges: np.ndarray) -> float:
    """Kolmogorov-Smirnov distance between samples and a piecewise-linear CDF."""
    xs = np.sort(np.asarray(samples, dtype=float))
    n = xs.size
    f = np.interp(xs, edges, cdf_at_edges)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def equivariance_check(
    bundle: TrajectoryBundle,
    slices: list[tuple[float, WaveFunction]],
    min_particles: int = 100,
) -> np.ndarray:
    """KS distance between particle positions and |psi|^2 per slice.

    1D returns one statistic per slice; 2D the max over per-axis marginals.
    """
    stats = np.empty(len(slices))
    for k, (t, wf) in enumerate(slices):
        kb = int(np.argmin(np.abs(bundle.times - t)))
        if abs(bundle.times[kb] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"bundle has no record at slice time {t}")
        ok = bundle.valid[:, kb]
        if int(ok.sum()) < min_particles:
            raise StatisticalPowerError(
                f"only {int(ok.sum())} valid particles at t={t}; need {min_particles}"
            )
        rho = wf.density()
        if wf.grid.ndim == 1:
            edges, cum = _grid_cdf(wf.grid, rho * wf.grid.spacing[0])
            stats[k] = ks_statistic(bundle.positions[ok, kb], edges, cum)
        else:
            per_axis = []
            for ax in range(2):
                masses = rho.sum(axis=1 - ax) * wf.grid.spacing[1 - ax] * wf.grid.spacing[ax]
                edges, cum = _grid_cdf(wf.grid, masses, axis=ax)
                per_axis.append(
                    ks_statistic(bundle.positions[ok, kb, ax], edges, cum)
                )
            stats[k] = max(per_axis)
    return stats


def ks_band(n: int, confidence: float = 0.99) -> float:
    """KS acceptance band c/sqrt(n); c = 1.63 at the 99% level."""
    return 1.63 / np.sqrt(n)


# ---------------------------------------------------------------------------
# double slit (reduced transverse model)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DoubleSlitGeometry:
    """Transverse-1D double slit with time standing in for the longitudinal
    coordinate (z = speed * t)."""

    slit_separation: float = 14.0
    slit_width: float = 1.0          # Gaussian sigma per slit
    mass: float = 1.0
    hbar_ref: float = 1.0
    propagation_time: float = 20.0
    longitudinal_speed: float = 1.0
    halfwidth: float = 75.0
    n_nodes: int = 2048
    n_slices: int = 640
    screen_bins: int = 21

    def fringe_spacing(self, hbar: float, t: float) -> float:
        """Spacing of the two-slit interference maxima at time t.

        Gaussian-slit closed form; for large t it reduces to the Fraunhofer
        rule (de Broglie wavelength) * (distance) / (separation) with
        distance = speed * t.
        """
        a = self.slit_separation / 2.0
        s2 = self.slit_width**2
        tau = hbar * t / (2.0 * self.mass * s2)
        return 2.0 * np.pi * s2 * (1.0 + tau * tau) / (tau * a)

    def screen_edges(self, hbar: float) -> np.ndarray:
        """Bin edges pitched at a quarter fringe, one bin centered on the
        axis, so maxima and minima land in separate bins with the steep
        flanks kept out of the minima bins."""
        pitch = self.fringe_spacing(hbar, self.propagation_time) / 4.0
        n = self.screen_bins
        return (np.arange(n + 1) - n / 2.0) * pitch

    def initial_state(self, hbar: float) -> WaveFunction:
        grid = Grid.regular(-self.halfwidth, self.halfwidth, self.n_nodes)
        a = self.slit_separation / 2.0
        up = gaussian_packet(grid, a, self.slit_width, 0.0, hbar, self.mass)
        dn = gaussian_packet(grid, -a, self.slit_width, 0.0, hbar, self.mass)
        return WaveFunction(grid, up.psi + dn.psi, hbar, self.mass).normalized()


@dataclass(frozen=True)
class FringeReport:
    n_fringes: int
    visibility: float
    peak_positions: np.ndarray


def fringe_analysis(positions: np.ndarray, values: np.ndarray, floor_rel: float = 0.08) -> FringeReport:
    """Count resolvable fringes and their worst peak/valley visibility.

    Peaks are interior local maxima above ``floor_rel`` of the global max;
    the visibility of each adjacent peak/valley pair is
    (peak - valley)/(peak + valley) and the reported figure is the minimum
    over pairs flanked by counted peaks.
    """
    v = np.asarray(values, dtype=float)
    floor = floor_rel * float(v.max())
    peaks = [
        i
        for i in range(1, len(v) - 1)
        if v[i] > floor and v[i] >= v[i - 1] and v[i] > v[i + 1]
    ]
    if len(peaks) < 2:
        return FringeReport(len(peaks), 1.0 if peaks else 0.0, np.asarray(positions)[peaks])
    vis = []
    for a, b in zip(peaks[:-1], peaks[1:]):
        valley = float(np.min(v[a : b + 1]))
        lower_peak = min(v[a], v[b])
        vis.append((lower_peak - valley) / (lower_peak + valley) if lower_peak + valley > 0 else 0.0)
    return FringeReport(len(peaks), float(min(vis)), np.asarray(positions)[peaks])


def lattice_fringe_report(counts, floor_rel: float = 0.2) -> FringeReport:
    """Fringe metrics for a histogram binned on the quarter-fringe lattice.

    Peak bins sit at lattice offsets 0 mod 4 from the central bin, minima at
    2 mod 4.  A fringe is counted when its peak bin clears ``floor_rel`` of
    the maximum; the reported visibility is the worst (peak - valley) /
    (peak + valley) over counted fringes and their adjacent minima bins.
    """
    c = np.asarray(counts, dtype=float)
    n = c.size
    center = n // 2
    floor = floor_rel * float(c.max())
    peaks = [i for i in range(n) if (i - center) % 4 == 0 and c[i] >= max(floor, 1.0)]
    if not peaks:
        return FringeReport(0, 0.0, np.array([]))
    vis = []
    for pidx in peaks:
        sides = [v for v in (pidx - 2, pidx + 2) if 0 <= v < n]
        worst = min(
            (c[pidx] - c[v]) / (c[pidx] + c[v]) if c[pidx] + c[v] > 0 else 0.0
            for v in sides
        )
        vis.append(worst)
    return FringeReport(len(peaks), float(min(vis)), np.asarray(peaks))


@dataclass(frozen=True)
class DoubleSlitResult:
    geometry: DoubleSlitGeometry
    hbar: float
    slices: list
    bundle: TrajectoryBundle
    slit_ids: np.ndarray           # +1 upper slit, -1 lower
    screen_centers: np.ndarray
    screen_counts: np.ndarray
    fringes_histogram: FringeReport
    fringes_density: FringeReport

    def screen_positions(self) -> np.ndarray:
        return self.bundle.positions[:, -1]


def double_slit_scenario(
    geometry: DoubleSlitGeometry,
    hbar_scale: float = 1.0,
    n_particles: int = 100,
    seed: int = 20,
) -> DoubleSlitResult:
    """Evolve the two-slit state, trace n_particles Bohmian paths, histogram
    the screen plane and analyse the fringe structure."""
    hbar = hbar_scale * geometry.hbar_ref
    psi0 = geometry.initial_state(hbar)
    dt_slice = geometry.propagation_time / geometry.n_slices
    slices = split_step_slices(
        psi0, np.zeros(psi0.grid.shape), dt_slice, geometry.n_slices, record_every=1
    )
    x0 = sample_quantum_equilibrium(psi0, n_particles, seed)
    slit_ids = np.where(x0 >= 0, 1, -1)
    bundle = integrate_bohm(slices, x0, dt=dt_slice)

    final = bundle.positions[:, -1]
    ok = bundle.valid[:, -1]
    t_final, psi_final = slices[-1]
    rho_final = psi_final.density()
    edges = geometry.screen_edges(hbar)
    counts, _ = np.histogram(final[ok], bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])

    xg = psi_final.grid.axis(0)
    sel = np.abs(xg) <= edges[-1]
    return DoubleSlitResult(
        geometry,
        hbar,
        slices,
        bundle,
        slit_ids,
        centers,
        counts,
        lattice_fringe_report(counts),
        fringe_analysis(xg[sel], rho_final[sel]),
    )




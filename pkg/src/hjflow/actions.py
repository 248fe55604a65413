"""Classical actions: closed forms, direct path minimization, and the
deterministic action of a particle with known initial position and velocity.

Conventions.  The Lagrangian is L(x, xdot) = (1/2) m xdot^2 - V(x) with

    free:      V = 0
    linear:    V = -K.x           (constant force K on the particle)
    harmonic:  V = (1/2) m w^2 x^2
    tabulated: V sampled on a grid

For the linear potential the minimal action between (x0, 0) and (x, t) is

    S_cl = m (x - x0)^2 / (2t) + K.(x + x0) t/2 - K^2 t^3 / (24 m)

and the minimizing path is the parabola with initial velocity
v0 = (x - x0)/t - K t/(2m).  The harmonic closed form

    S_cl = (m w / 2 sin wt) ((x^2 + x0^2) cos wt - 2 x.x0)

is validated against the direct numerical minimization in the test suite
before anything downstream relies on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import (
    CausticError,
    ConvergenceError,
    InvalidHorizonError,
    StabilityError,
    UnsupportedPotentialError,
)
from .gridops import cumulative_hermite, gradient_axis, interp_linear
from .kernels import KIND_HARMONIC, KIND_LINEAR, _infconv_np
from .minplus import Grid, ScalarField


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FreePotential:
    def energy(self, x, m):
        return np.zeros(np.asarray(x).shape[:-1])

    def gradient(self, x, m):
        return np.zeros_like(np.asarray(x, dtype=float))

    def hessian_scale(self, m):
        return 0.0


@dataclass(frozen=True)
class LinearPotential:
    """V(x) = -K.x: uniform force K pulls the particle along +K."""

    force: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "force", tuple(float(k) for k in np.atleast_1d(self.force)))

    def energy(self, x, m):
        return -np.asarray(x, dtype=float) @ np.asarray(self.force)

    def gradient(self, x, m):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(-np.asarray(self.force), x.shape).copy()

    def hessian_scale(self, m):
        return 0.0


@dataclass(frozen=True)
class HarmonicPotential:
    """V(x) = (1/2) m omega^2 |x|^2, isotropic."""

    omega: float

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("omega must be >= 0")

    def energy(self, x, m):
        x = np.asarray(x, dtype=float)
        return 0.5 * m * self.omega**2 * np.sum(x * x, axis=-1)

    def gradient(self, x, m):
        return m * self.omega**2 * np.asarray(x, dtype=float)

    def hessian_scale(self, m):
        return m * self.omega**2


@dataclass(frozen=True)
class TabulatedPotential:
    """V sampled on a grid; energy/gradient by multilinear interpolation."""

    table: ScalarField
    _grads: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not np.isfinite(self.table.values).all():
            raise ValueError("tabulated potential must be finite")
        grads = tuple(
            gradient_axis(self.table.values, self.table.grid.spacing[k], k)
            for k in range(self.table.grid.ndim)
        )
        object.__setattr__(self, "_grads", grads)

    def energy(self, x, m):
        pts = np.asarray(x, dtype=float)
        flat = pts.reshape(-1, pts.shape[-1]) if pts.ndim > 1 else pts.reshape(-1, 1)
        query = flat[:, 0] if self.table.grid.ndim == 1 else flat
        vals = interp_linear(self.table.grid, self.table.values, query)
        return vals.reshape(pts.shape[:-1])

    def gradient(self, x, m):
        pts = np.asarray(x, dtype=float)
        flat = pts.reshape(-1, pts.shape[-1]) if pts.ndim > 1 else pts.reshape(-1, 1)
        query = flat[:, 0] if self.table.grid.ndim == 1 else flat
        out = np.empty_like(flat)
        for k in range(self.table.grid.ndim):
            out[:, k] = interp_linear(self.table.grid, self._grads[k], query)
        return out.reshape(pts.shape)

    def hessian_scale(self, m):
        return None  # unknown analytically


Potential = FreePotential | LinearPotential | HarmonicPotential | TabulatedPotential


@dataclass(frozen=True)
class LagrangianSpec:
    """Mass plus potential descriptor."""

    mass: float
    potential: Potential = FreePotential()

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")


@dataclass(frozen=True)
class Trajectory:
    """Sampled path: strictly increasing times, positions, velocities."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if len(self.positions) != len(t) or len(self.velocities) != len(t):
            raise ValueError("positions/velocities must match times in length")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        object.__setattr__(self, "velocities", np.asarray(self.velocities, dtype=float))


def _as_point(x) -> np.ndarray:
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1 or p.size not in (1, 2):
        raise ValueError("positions must be scalars or 1/2-component vectors")
    return p


# ---------------------------------------------------------------------------
# closed-form kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AxisKernel:
    kind: int
    p0: float
    p1: float = 0.0
    p2: float = 0.0


class ActionKernel:
    """S_cl(x, t; y) as a separable sum of per-axis closed forms.

    The same parametrization feeds both inf-convolution backends and the
    scalar evaluator, so grid identities hold bitwise.
    """

    def __init__(self, axes):
        self.axes = tuple(axes)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def eval_axis(self, k: int, x, y):
        ak = self.axes[k]
        return _infconv_np.eval_closed(ak.kind, ak.p0, ak.p1, ak.p2, x, y)

    def __call__(self, x, y):
        if self.ndim == 1:
            return self.eval_axis(0, x, y)
        total = self.eval_axis(0, x[..., 0], y[..., 0])
        for k in range(1, self.ndim):
            total = total + self.eval_axis(k, x[..., k], y[..., k])
        return total


def closed_action_kernel(spec: LagrangianSpec, t: float, ndim: int = 1) -> ActionKernel:
    """Closed-form EL action kernel for free/linear/harmonic potentials."""
    if t <= 0:
        raise InvalidHorizonError(f"propagation time must be positive, got {t}")
    m = spec.mass
    pot = spec.potential
    if isinstance(pot, FreePotential):
        ax = [AxisKernel(KIND_LINEAR, m / (2.0 * t)) for _ in range(ndim)]
    elif isinstance(pot, LinearPotential):
        K = pot.force
        if len(K) != ndim:
            raise ValueError(f"force has {len(K)} components, expected {ndim}")
        ax = [
            AxisKernel(
                KIND_LINEAR,
                m / (2.0 * t),
                K[k] * t / 2.0,
                K[k] * K[k] * t**3 / (24.0 * m),
            )
            for k in range(ndim)
        ]
    elif isinstance(pot, HarmonicPotential):
        if pot.omega == 0.0:
            return closed_action_kernel(LagrangianSpec(m, FreePotential()), t, ndim)
        wt = pot.omega * t
        s = math.sin(wt)
        if abs(s) < 1e-12 * max(1.0, abs(wt)):
            raise CausticError(f"omega*t = {wt} is a focal time (sin = {s})")
        ax = [AxisKernel(KIND_HARMONIC, m * pot.omega / (2.0 * s), math.cos(wt))] * ndim
    else:
        raise UnsupportedPotentialError(
            "no closed-form action for tabulated potentials; use el_action_numeric"
        )
    return ActionKernel(ax)


def el_action_closed(spec: LagrangianSpec, x, t: float, x0) -> float:
    """Minimal action joining x0 at time 0 to x at time t, in closed form."""
    xp, x0p = _as_point(x), _as_point(x0)
    if xp.size != x0p.size:
        raise ValueError("x and x0 must have the same dimension")
    kernel = closed_action_kernel(spec, t, ndim=xp.size)
    total = 0.0
    for k in range(xp.size):
        total += float(kernel.eval_axis(k, xp[k], x0p[k]))
    return total


def optimal_trajectory_linear(m: float, K, x, t: float, x0, n: int = 100) -> Trajectory:
    """Minimizing path under a constant force: parabola with exact endpoints.

    x(s) = x0 + (s/t)(x - x0) - (K/2m) t s + (K/2m) s^2, so the initial
    velocity is v0 = (x - x0)/t - K t/(2m) and v(s) = v0 + K s / m.
    """
    if t <= 0:
        raise InvalidHorizonError(f"propagation time must be positive, got {t}")
    if n < 2:
        raise ValueError("need at least 2 samples")
    xp, x0p = _as_point(x), _as_point(x0)
    Kv = np.zeros_like(xp) if K is None else np.broadcast_to(
        np.atleast_1d(np.asarray(K, dtype=float)), xp.shape
    )
    s = np.linspace(0.0, t, n)
    pos = (
        x0p[None, :]
        + np.outer(s / t, xp - x0p)
        - np.outer(t * s, Kv) / (2.0 * m)
        + np.outer(s * s, Kv) / (2.0 * m)
    )
    pos[0] = x0p
    pos[-1] = xp
    vel = (xp - x0p)[None, :] / t - (t / (2.0 * m)) * Kv[None, :] + np.outer(s, Kv) / m
    squeeze = xp.size == 1
    return Trajectory(s, pos[:, 0] if squeeze else pos, vel[:, 0] if squeeze else vel)


# ---------------------------------------------------------------------------
# direct minimization of the discretized action
# ---------------------------------------------------------------------------

# 3-point Gauss-Legendre on [0,1] and quadratic Lagrange basis on {0, 1/2, 1}
_GAUSS_U = np.array([0.5 - math.sqrt(15) / 10, 0.5, 0.5 + math.sqrt(15) / 10])
_GAUSS_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])
_BASIS_L = np.stack(
    [2 * (_GAUSS_U - 0.5) * (_GAUSS_U - 1), -4 * _GAUSS_U * (_GAUSS_U - 1), 2 * _GAUSS_U * (_GAUSS_U - 0.5)],
    axis=1,
)  # (gauss, dof)
_BASIS_D = np.stack(
    [4 * _GAUSS_U - 3, 4 - 8 * _GAUSS_U, 4 * _GAUSS_U - 1], axis=1
)


class _DiscreteAction:
    """Action and gradient over piecewise-quadratic paths with fixed ends.

    DOFs are node and midpoint positions (2n+1 samples, endpoints clamped).
    Quadratic segments reproduce the free and linear minimizers exactly and
    carry an O(h^4) energy error for smooth potentials, which is what lets a
    200-segment path match closed forms to ~1e-10.
    """

    def __init__(self, spec, x0, x, t, n):
        self.spec = spec
        self.h = t / n
        self.n = n
        self.d = x0.size
        self.x0 = x0
        self.x1 = x

    def _segments(self, q_int):
        full = np.empty((2 * self.n + 1, self.d))
        full[0] = self.x0
        full[-1] = self.x1
        full[1:-1] = q_int
        return full

    def value(self, q_int) -> float:
        full = self._segments(q_int)
        a, b, c = full[0:-1:2], full[1::2], full[2::2]
        m = self.spec.mass
        total = 0.0
        for g in range(3):
            xu = _BASIS_L[g, 0] * a + _BASIS_L[g, 1] * b + _BASIS_L[g, 2] * c
            vu = (_BASIS_D[g, 0] * a + _BASIS_D[g, 1] * b + _BASIS_D[g, 2] * c) / self.h
            lag = 0.5 * m * np.sum(vu * vu, axis=1) - self.spec.potential.energy(xu, m)
            total += _GAUSS_W[g] * self.h * float(np.sum(lag))
        return total

    def grad(self, q_int) -> np.ndarray:
        full = self._segments(q_int)
        a, b, c = full[0:-1:2], full[1::2], full[2::2]
        m = self.spec.mass
        g_full = np.zeros_like(full)
        ga, gb, gc = g_full[0:-1:2], g_full[1::2], g_full[2::2]
        for g in range(3):
            xu = _BASIS_L[g, 0] * a + _BASIS_L[g, 1] * b + _BASIS_L[g, 2] * c
            vu = (_BASIS_D[g, 0] * a + _BASIS_D[g, 1] * b + _BASIS_D[g, 2] * c) / self.h
            dV = self.spec.potential.gradient(xu, m)
            wh = _GAUSS_W[g] * self.h
            kin = (m / self.h) * vu
            ga += wh * (_BASIS_D[g, 0] * kin - _BASIS_L[g, 0] * dV)
            gb += wh * (_BASIS_D[g, 1] * kin - _BASIS_L[g, 1] * dV)
            gc += wh * (_BASIS_D[g, 2] * kin - _BASIS_L[g, 2] * dV)
        return g_full[1:-1]

    def curvature(self, dir_int) -> float:
        """d.H.d for quadratic potentials (exact), used for the line search."""
        hs = self.spec.potential.hessian_scale(self.spec.mass)
        full = np.zeros((2 * self.n + 1, self.d))
        full[1:-1] = dir_int
        a, b, c = full[0:-1:2], full[1::2], full[2::2]
        m = self.spec.mass
        total = 0.0
        for g in range(3):
            du = _BASIS_L[g, 0] * a + _BASIS_L[g, 1] * b + _BASIS_L[g, 2] * c
            dv = (_BASIS_D[g, 0] * a + _BASIS_D[g, 1] * b + _BASIS_D[g, 2] * c) / self.h
            total += _GAUSS_W[g] * self.h * float(
                np.sum(m * dv * dv) - hs * np.sum(du * du)
            )
        return total


def el_action_numeric(
    spec: LagrangianSpec,
    x,
    t: float,
    x0,
    n_steps: int = 200,
    grad_tol: float = 1e-10,
    max_iter: int | None = None,
):
    """Minimize the discretized action integral over interior path nodes.

    Nonlinear conjugate gradient (Polak-Ribiere+, straight-line start) over
    piecewise-quadratic segments; 3-point Gauss quadrature per segment.
    Returns (action value, stationary Trajectory).

    For tabulated potentials the attainable gradient norm bottoms out at the
    table's interpolation-consistency floor; pass a grad_tol matched to the
    table resolution there (the default 1e-10 targets analytic potentials).
    """
    if t <= 0:
        raise InvalidHorizonError(f"propagation time must be positive, got {t}")
    if n_steps < 2:
        raise ValueError("need at least 2 segments")
    xp, x0p = _as_point(x), _as_point(x0)
    if xp.size != x0p.size:
        raise ValueError("x and x0 must have the same dimension")

    prob = _DiscreteAction(spec, x0p, xp, t, int(n_steps))
    s_full = np.linspace(0.0, t, 2 * n_steps + 1)
    q = (x0p[None, :] + np.outer(s_full / t, xp - x0p))[1:-1]

    quadratic = prob.spec.potential.hessian_scale(spec.mass) is not None
    max_iter = max_iter or 40 * (2 * n_steps + 1)

    g = prob.grad(q)
    gnorm = float(np.linalg.norm(g))
    d = -g
    it = 0
    while gnorm > grad_tol:
        if it >= max_iter:
            raise ConvergenceError(
                f"CG failed to reach gradient tolerance after {max_iter} iterations",
                residual=gnorm,
            )
        if quadratic:
            dhd = prob.curvature(d)
            if dhd <= 0:
                raise ConvergenceError(
                    "discrete action not convex along search direction "
                    "(beyond a caustic?)",
                    residual=gnorm,
                )
            alpha = -float(np.sum(g * d)) / dhd
        else:
            alpha = _secant_line_search(prob, q, d, g)
        q = q + alpha * d
        g_new = prob.grad(q)
        beta = max(0.0, float(np.sum(g_new * (g_new - g)) / np.sum(g * g)))
        d = -g_new + beta * d
        if float(np.sum(d * g_new)) >= 0:  # restart on loss of descent
            d = -g_new
        g = g_new
        gnorm = float(np.linalg.norm(g))
        it += 1

    value = prob.value(q)
    full = prob._segments(q)
    vel = _p2_velocities(full, prob.h)
    squeeze = xp.size == 1
    traj = Trajectory(
        s_full, full[:, 0] if squeeze else full, vel[:, 0] if squeeze else vel
    )
    return value, traj


def _secant_line_search(prob, q, d, g, alpha0=1.0, iters=12):
    """Secant iteration on phi'(alpha) with a shrinking fallback."""
    phi0p = float(np.sum(g * d))
    a_prev, f_prev = 0.0, phi0p
    a = alpha0
    for _ in range(iters):
        fp = float(np.sum(prob.grad(q + a * d) * d))
        if fp == f_prev:
            break
        a_new = a - fp * (a - a_prev) / (fp - f_prev)
        a_prev, f_prev, a = a, fp, a_new
        if abs(fp) < 1e-14 * max(1.0, abs(phi0p)):
            break
    v0 = prob.value(q)
    while prob.value(q + a * d) > v0 and abs(a) > 1e-16:
        a *= 0.5
    return a


def _p2_velocities(full: np.ndarray, h: float) -> np.ndarray:
    """Derivative of the piecewise-quadratic path at every sample instant."""
    n = (full.shape[0] - 1) // 2
    a, b, c = full[0:-1:2], full[1::2], full[2::2]
    vel = np.empty_like(full)
    v_left = (-3 * a + 4 * b - c) / h
    v_mid = (c - a) / h
    v_right = (a - 4 * b + 3 * c) / h
    vel[1::2] = v_mid
    vel[0] = v_left[0]
    vel[-1] = v_right[-1]
    if n > 1:  # interior element joints: mean of one-sided derivatives
        vel[2:-1:2] = 0.5 * (v_right[:-1] + v_left[1:])
    return vel


# ---------------------------------------------------------------------------
# deterministic action of a discerned particle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeterministicActionResult:
    """Trajectory xi(t) from (x0, v0) plus the field S(x, t) = m xi'(t).x + g(t).

    dg/dt = -(1/2) m xi'^2 - V(xi) - m xi''.xi, with xi'' = -grad V / m along
    solutions; g accumulates by Simpson quadrature on the RK4 samples.  The
    field solves the Hamilton-Jacobi equation exactly on the trajectory and
    (for curved potentials) nowhere else.
    """

    spec: LagrangianSpec
    times: np.ndarray
    positions: np.ndarray   # (n+1, d)
    velocities: np.ndarray  # (n+1, d)
    g_values: np.ndarray
    g_derivs: np.ndarray

    @property
    def xi(self) -> Trajectory:
        squeeze = self.positions.shape[1] == 1
        return Trajectory(
            self.times,
            self.positions[:, 0] if squeeze else self.positions,
            self.velocities[:, 0] if squeeze else self.velocities,
        )

    def xi_at(self, t) -> np.ndarray:
        return np.array([
            cumulative_hermite(self.times, self.positions[:, k], self.velocities[:, k], t)
            for k in range(self.positions.shape[1])
        ])

    def velocity_at(self, t) -> np.ndarray:
        acc = -self.spec.potential.gradient(self.positions, self.spec.mass) / self.spec.mass
        return np.array([
            cumulative_hermite(self.times, self.velocities[:, k], acc[:, k], t)
            for k in range(self.positions.shape[1])
        ])

    def g_at(self, t) -> float:
        return float(cumulative_hermite(self.times, self.g_values, self.g_derivs, t))

    def action(self, x, t) -> float:
        """S(x, t; x0, v0) = m xi'(t).x + g(t)."""
        xp = _as_point(x)
        return float(self.spec.mass * self.velocity_at(t) @ xp + self.g_at(t))

    def action_field(self, grid: Grid, t: float) -> ScalarField:
        vel = self.velocity_at(t)
        g = self.g_at(t)
        meshes = grid.meshes()
        vals = self.spec.mass * sum(vel[k] * meshes[k] for k in range(grid.ndim)) + g
        return ScalarField(grid, vals)


def deterministic_action(
    spec: LagrangianSpec,
    x0,
    v0,
    t_end: float,
    dt: float,
    stability_tol: float = 1e-2,
) -> DeterministicActionResult:
    """Integrate Newton's equation from (x0, v0) and accumulate g(t).

    Classical RK4 with a fixed step (the step count is rounded up to an even
    number so the Simpson quadrature for g applies cleanly).  For
    time-independent potentials the energy drift is monitored; exceeding
    ``stability_tol`` (relative) raises StabilityError.
    """
    if dt <= 0 or t_end <= 0:
        raise InvalidHorizonError("dt and t_end must be positive")
    x0p, v0p = _as_point(x0), _as_point(v0)
    if x0p.size != v0p.size:
        raise ValueError("x0 and v0 must have the same dimension")
    n = max(2, int(round(t_end / dt)))
    if n % 2:
        n += 1
    h = t_end / n
    m = spec.mass
    pot = spec.potential

    times = np.linspace(0.0, t_end, n + 1)
    pos = np.empty((n + 1, x0p.size))
    vel = np.empty_like(pos)
    pos[0], vel[0] = x0p, v0p

    def acc(x):
        return -pot.gradient(x, m) / m

    for i in range(n):
        x, v = pos[i], vel[i]
        k1x, k1v = v, acc(x)
        k2x, k2v = v + 0.5 * h * k1v, acc(x + 0.5 * h * k1x)
        k3x, k3v = v + 0.5 * h * k2v, acc(x + 0.5 * h * k2x)
        k4x, k4v = v + h * k3v, acc(x + h * k3x)
        pos[i + 1] = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        vel[i + 1] = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)

    energy = 0.5 * m * np.sum(vel * vel, axis=1) + pot.energy(pos, m)
    scale = max(abs(float(energy[0])), 0.5 * m * float(np.max(np.sum(vel * vel, axis=1))), 1e-30)
    drift = float(np.max(np.abs(energy - energy[0])))
    if drift > stability_tol * scale:
        raise StabilityError(
            f"energy drift {drift:.3e} exceeds {stability_tol:.1e} of scale {scale:.3e}; "
            "reduce dt"
        )

    # dg/dt with xi'' taken from the force, not numerical differentiation
    g_dot = (
        -0.5 * m * np.sum(vel * vel, axis=1)
        - pot.energy(pos, m)
        + np.sum(pot.gradient(pos, m) * pos, axis=1)
    )
    g = cumulative_simpson(g_dot, dx=h, initial=0.0)
    return DeterministicActionResult(spec, times, pos, vel, np.asarray(g), g_dot)

"""Shared finite-difference and interpolation helpers on uniform grids."""

from __future__ import annotations

import numpy as np


def interp_linear(grid, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of node values at query points.

    points: shape (n,) for 1D grids or (n, 2) for 2D.  Points outside the
    grid return NaN (callers decide how to flag them).
    """
    values = np.asarray(values, dtype=float)
    if grid.ndim == 1:
        x = np.atleast_1d(np.asarray(points, dtype=float))
        u = (x - grid.origin[0]) / grid.spacing[0]
        out = np.full(x.shape, np.nan)
        ok = (u >= 0) & (u <= grid.shape[0] - 1)
        uo = np.clip(u[ok], 0, grid.shape[0] - 1 - 1e-12)
        i0 = np.floor(uo).astype(np.intp)
        w = uo - i0
        out[ok] = (1 - w) * values[i0] + w * values[i0 + 1]
        return out

    pts = np.atleast_2d(np.asarray(points, dtype=float))
    u = (pts[:, 0] - grid.origin[0]) / grid.spacing[0]
    v = (pts[:, 1] - grid.origin[1]) / grid.spacing[1]
    out = np.full(pts.shape[0], np.nan)
    ok = (u >= 0) & (u <= grid.shape[0] - 1) & (v >= 0) & (v <= grid.shape[1] - 1)
    uo = np.clip(u[ok], 0, grid.shape[0] - 1 - 1e-12)
    vo = np.clip(v[ok], 0, grid.shape[1] - 1 - 1e-12)
    i0 = np.floor(uo).astype(np.intp)
    j0 = np.floor(vo).astype(np.intp)
    a = uo - i0
    b = vo - j0
    out[ok] = (
        (1 - a) * (1 - b) * values[i0, j0]
        + a * (1 - b) * values[i0 + 1, j0]
        + (1 - a) * b * values[i0, j0 + 1]
        + a * b * values[i0 + 1, j0 + 1]
    )
    return out


def gradient_axis(values: np.ndarray, spacing: float, axis: int) -> np.ndarray:
    """Centered differences on the interior, one-sided at the boundary."""
    return np.gradient(values, spacing, axis=axis)


def second_diff_axis(values: np.ndarray, spacing: float, axis: int) -> np.ndarray:
    """Centered second difference; boundary entries are NaN."""
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    out = np.full_like(v, np.nan)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / spacing**2
    return np.moveaxis(out, 0, axis)


def trapezoid_mass(grid, values: np.ndarray) -> float:
    """Grid quadrature of a density: plain node sum times cell volume.

    On the periodic windows used by the spectral solver this equals the
    trapezoid rule (no duplicated endpoint is stored).
    """
    cell = float(np.prod(grid.spacing))
    return float(np.sum(values) * cell)


def cumulative_hermite(times, values, derivs, t):
    """Cubic Hermite interpolation of sampled (value, derivative) pairs."""
    times = np.asarray(times)
    t = float(t)
    if not (times[0] - 1e-12 <= t <= times[-1] + 1e-12):
        raise ValueError(f"time {t} outside sampled range [{times[0]}, {times[-1]}]")
    i = min(max(int(np.searchsorted(times, t, side="right")) - 1, 0), len(times) - 2)
    h = times[i + 1] - times[i]
    u = (t - times[i]) / h
    h00 = (1 + 2 * u) * (1 - u) ** 2
    h10 = u * (1 - u) ** 2
    h01 = u * u * (3 - 2 * u)
    h11 = u * u * (u - 1)
    return (
        h00 * values[i]
        + h10 * h * derivs[i]
        + h01 * values[i + 1]
        + h11 * h * derivs[i + 1]
    )

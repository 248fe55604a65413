"""Pure-NumPy inf-convolution kernels (fallback backend and oracle).

The closed-form evaluators must keep the exact operation order documented in
the package docstring: backend equivalence tests assert bitwise agreement
with the compiled core.
"""

from __future__ import annotations

import numpy as np

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def eval_closed(kind, p0, p1, p2, x, y):
    d = x - y
    if kind == 0:  # quadratic + linear terms (free/linear potentials)
        return p0 * d * d + p1 * (x + y) - p2
    if kind == 1:  # harmonic: p0 = m*w/(2 sin wt), p1 = cos wt
        return p0 * ((x * x + y * y) * p1 - 2.0 * x * y)
    raise ValueError(f"unknown kernel kind {kind}")


def infconv_closed_1d(f, x_out, y_in, kind, p0, p1, p2, refine, refine_iters):
    n_out, n_in = x_out.size, y_in.size
    out = np.empty(n_out)
    argmin = np.empty(n_out, dtype=np.intp)
    # chunk rows to bound the broadcast matrix at ~32 MB
    chunk = max(1, int(4_000_000 // max(n_in, 1)))
    for s in range(0, n_out, chunk):
        e = min(s + chunk, n_out)
        vals = f[None, :] + eval_closed(kind, p0, p1, p2, x_out[s:e, None], y_in[None, :])
        argmin[s:e] = np.argmin(vals, axis=1)
        out[s:e] = vals[np.arange(e - s), argmin[s:e]]
    if refine:
        ev = lambda x, y: eval_closed(kind, p0, p1, p2, x, y)
        _refine_inplace(out, argmin, f, x_out, y_in, ev, refine_iters)
    return out


def infconv_callable_1d(f, x_out, y_in, kernel, refine, refine_iters):
    n_out, n_in = x_out.size, y_in.size
    out = np.empty(n_out)
    argmin = np.empty(n_out, dtype=np.intp)
    chunk = max(1, int(4_000_000 // max(n_in, 1)))
    for s in range(0, n_out, chunk):
        e = min(s + chunk, n_out)
        vals = f[None, :] + kernel(x_out[s:e, None], y_in[None, :])
        argmin[s:e] = np.argmin(vals, axis=1)
        out[s:e] = vals[np.arange(e - s), argmin[s:e]]
    if refine:
        _refine_inplace(out, argmin, f, x_out, y_in, kernel, refine_iters)
    return out


def _refine_inplace(out, argmin, f, x_out, y_in, kernel, iters):
    """Golden-section search around the best node, all output nodes at once.

    f is interpolated linearly between the three bracketing nodes; nodes with
    an interior +inf neighbour keep their scan value (this preserves the
    delta_min elementary-solution identity exactly).  The refined candidate
    never replaces a smaller scan value.
    """
    j = argmin
    ok = (j >= 1) & (j <= y_in.size - 2)
    if not np.any(ok):
        return
    jo = j[ok]
    ok_idx = np.nonzero(ok)[0]
    fin = np.isfinite(f[jo - 1]) & np.isfinite(f[jo]) & np.isfinite(f[jo + 1])
    ok_idx = ok_idx[fin]
    if ok_idx.size == 0:
        return
    jo = j[ok_idx]
    xo = x_out[ok_idx]

    ya, ym, yb = y_in[jo - 1], y_in[jo], y_in[jo + 1]
    fa, fm, fb = f[jo - 1], f[jo], f[jo + 1]

    def h(y):
        left = y <= ym
        f_int = np.where(
            left,
            fa + (y - ya) * (fm - fa) / (ym - ya),
            fm + (y - ym) * (fb - fm) / (yb - ym),
        )
        return f_int + kernel(xo, y)

    a, b = ya.copy(), yb.copy()
    for _ in range(int(iters)):
        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        shrink_right = h(c) < h(d)
        b = np.where(shrink_right, d, b)
        a = np.where(shrink_right, a, c)
    y_best = 0.5 * (a + b)
    cand = h(y_best)
    np.minimum.at(out, ok_idx, cand)

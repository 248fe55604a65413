"""Inf-convolution kernels: compiled core with a pure-NumPy fallback.

The O(N^2) node scan plus per-node golden-section refinement is the hot
inner loop of the Hopf-Lax solver.  `hjflow.kernels._infconv_cy` implements
it in Cython; `_infconv_np` is the vectorized NumPy reference used when the
extension is unavailable (and as the oracle in backend-equivalence tests).

Closed-form action kernels are described per axis by (kind, p0, p1, p2):

    kind 0 (quadratic/linear):  p0*d*d + p1*(x + y) - p2,  d = x - y
    kind 1 (harmonic):          p0*((x*x + y*y)*p1 - 2.0*x*y)

Both backends evaluate these with the identical operation order, so their
scan results agree bitwise.
"""

from __future__ import annotations

import numpy as np

from . import _infconv_np

try:  # compiled core is optional
    from . import _infconv_cy  # type: ignore

    BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on build environment
    _infconv_cy = None
    BACKEND = "numpy"

KIND_LINEAR = 0
KIND_HARMONIC = 1


def available_backends() -> tuple[str, ...]:
    return ("numpy", "cython") if _infconv_cy is not None else ("numpy",)


def _axis_spec(kernel, axis: int):
    """(kind, p0, p1, p2) for a closed-form axis kernel, else None."""
    axes = getattr(kernel, "axes", None)
    if axes is None:
        return None
    ak = axes[axis]
    return int(ak.kind), float(ak.p0), float(ak.p1), float(ak.p2)


def infconv_1d(f_values, x_out, y_in, kernel, refine=False, refine_iters=60,
               backend: str | None = None):
    """out[i] = min_j f[j] + k(x_out[i], y_in[j]) with optional refinement.

    ``kernel`` may be an ActionKernel (closed form, fast path), a vectorized
    callable k(x, y), or a precomputed matrix of shape (n_out, n_in).
    """
    f_values = np.ascontiguousarray(f_values, dtype=float)
    x_out = np.ascontiguousarray(x_out, dtype=float)
    y_in = np.ascontiguousarray(y_in, dtype=float)
    backend = backend or BACKEND

    if isinstance(kernel, np.ndarray):
        if kernel.shape != (x_out.size, y_in.size):
            raise ValueError("kernel matrix shape must be (n_out, n_in)")
        return np.min(f_values[None, :] + kernel, axis=1)

    spec = _axis_spec(kernel, 0)
    if spec is not None:
        kind, p0, p1, p2 = spec
        if backend == "cython" and _infconv_cy is not None:
            return _infconv_cy.infconv_closed_1d(
                f_values, x_out, y_in, kind, p0, p1, p2, bool(refine), int(refine_iters)
            )
        return _infconv_np.infconv_closed_1d(
            f_values, x_out, y_in, kind, p0, p1, p2, refine, refine_iters
        )

    if callable(kernel):
        return _infconv_np.infconv_callable_1d(
            f_values, x_out, y_in, kernel, refine, refine_iters
        )
    raise TypeError(f"unsupported kernel type: {type(kernel)!r}")


def infconv_2d(f_values, out_grid, in_grid, kernel, refine=False, refine_iters=60,
               backend: str | None = None):
    """2D inf-convolution.

    Separable closed-form kernels factor into two sweeps of 1D passes (exact:
    min over (y1, y2) commutes with the per-axis minima).  Generic callables
    fall back to the brute-force scan over all node pairs; the 2D callable
    convention is k(x1, x2, y1, y2) with broadcastable arrays.
    """
    f_values = np.asarray(f_values, dtype=float)
    if getattr(kernel, "axes", None) is not None and len(kernel.axes) == 2:
        x1, x2 = out_grid.axis(0), out_grid.axis(1)
        y1, y2 = in_grid.axis(0), in_grid.axis(1)
        # pass over axis 0 for each y2 column, then axis 1 for each x1 row
        mid = np.empty((x1.size, y2.size))
        for j in range(y2.size):
            mid[:, j] = infconv_1d(
                f_values[:, j], x1, y1, _AxisView(kernel, 0),
                refine=refine, refine_iters=refine_iters, backend=backend,
            )
        out = np.empty((x1.size, x2.size))
        for i in range(x1.size):
            out[i, :] = infconv_1d(
                mid[i, :], x2, y2, _AxisView(kernel, 1),
                refine=refine, refine_iters=refine_iters, backend=backend,
            )
        return out

    if callable(kernel):
        X1, X2 = out_grid.meshes()
        Y1, Y2 = in_grid.meshes()
        xf1, xf2 = X1.ravel(), X2.ravel()
        yf1, yf2 = Y1.ravel(), Y2.ravel()
        ff = f_values.ravel()
        out = np.empty(xf1.size)
        chunk = max(1, int(2e6 // max(yf1.size, 1)))
        for s in range(0, xf1.size, chunk):
            e = min(s + chunk, xf1.size)
            vals = kernel(xf1[s:e, None], xf2[s:e, None], yf1[None, :], yf2[None, :])
            out[s:e] = np.min(ff[None, :] + vals, axis=1)
        return out.reshape(out_grid.shape)
    raise TypeError(f"unsupported kernel type: {type(kernel)!r}")


class _AxisView:
    """Presents one axis of a separable ActionKernel as a 1D kernel."""

    def __init__(self, kernel, axis):
        self.axes = (kernel.axes[axis],)
        self._kernel = kernel
        self._axis = axis

    def __call__(self, x, y):
        return self._kernel.eval_axis(self._axis, x, y)

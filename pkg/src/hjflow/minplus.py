"""Min-plus (tropical) primitives on uniform grids.

The semiring is (R u {+inf}, min, +): min replaces addition, + replaces
multiplication, and +inf is the neutral element of min and absorbing for +.
+inf is represented by IEEE positive infinity, which saturates cleanly under
both operations as long as -inf and NaN are kept out of fields (enforced by
ScalarField).

Fields sample extended-real functions (actions, densities) on uniform 1D/2D
grids.  The central operation is the inf-convolution

    (f [] k)(x) = inf_y { f(y) + k(x, y) }

whose exact node scan (and optional golden-section refinement) lives in
hjflow.kernels with a compiled core and a NumPy fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError, OutOfDomainError
from . import kernels

#: Tropical neutral element (absorbing for +).
INF = np.inf


@dataclass(frozen=True)
class Grid:
    """Uniform rectilinear grid, 1D or 2D.

    Node i along an axis sits at origin + i*spacing. ``shape`` gives the node
    count per axis (>= 2), ``spacing`` > 0.
    """

    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        if not (1 <= len(self.shape) <= 2):
            raise ValueError("only 1D and 2D grids are supported")
        if len(self.origin) != len(self.shape) or len(self.spacing) != len(self.shape):
            raise ValueError("origin/spacing/shape dimensionality mismatch")
        if any(n < 2 for n in self.shape):
            raise ValueError("need at least 2 nodes per axis")
        if any(h <= 0 for h in self.spacing):
            raise ValueError("grid spacing must be positive")

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis(self, k: int = 0) -> np.ndarray:
        """Node coordinates along axis k."""
        return self.origin[k] + self.spacing[k] * np.arange(self.shape[k])

    def meshes(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of full grid shape (indexing='ij')."""
        return tuple(np.meshgrid(*(self.axis(k) for k in range(self.ndim)), indexing="ij"))

    def bounds(self, k: int = 0) -> tuple[float, float]:
        return self.origin[k], self.origin[k] + self.spacing[k] * (self.shape[k] - 1)

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.ndim,):
            raise ValueError(f"position must have {self.ndim} component(s)")
        for k in range(self.ndim):
            lo, hi = self.bounds(k)
            if not (lo <= x[k] <= hi):
                return False
        return True

    def nearest_index(self, x) -> tuple[int, ...]:
        """Index of the node nearest to x; exact midpoints round to the
        lower index."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not self.contains(x):
            raise OutOfDomainError(f"position {x} outside grid bounds")
        idx = []
        for k in range(self.ndim):
            u = (x[k] - self.origin[k]) / self.spacing[k]
            i = int(math.ceil(u - 0.5))  # round half down
            idx.append(min(max(i, 0), self.shape[k] - 1))
        return tuple(idx)

    @staticmethod
    def regular(lo: float, hi: float, n: int) -> "Grid":
        """1D grid with n nodes spanning [lo, hi] inclusive."""
        return Grid((float(lo),), ((float(hi) - float(lo)) / (n - 1),), (int(n),))

    @staticmethod
    def regular2d(lo, hi, n) -> "Grid":
        los = tuple(float(v) for v in lo)
        his = tuple(float(v) for v in hi)
        ns = tuple(int(v) for v in n)
        sp = tuple((h - l) / (k - 1) for l, h, k in zip(los, his, ns))
        return Grid(los, sp, ns)


class ScalarField:
    """Extended-real values on a Grid: every entry finite or +inf.

    Instances are treated as immutable; operations return new fields.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            if values.size == grid.size:
                values = values.reshape(grid.shape)
            else:
                raise ValueError(
                    f"values shape {values.shape} incompatible with grid {grid.shape}"
                )
        if np.isnan(values).any():
            raise ValueError("field values must not contain NaN")
        if np.isneginf(values).any():
            raise ValueError("field values must be finite or +inf")
        self.grid = grid
        self.values = values
        self.values.setflags(write=False)

    @staticmethod
    def from_function(grid: Grid, fn) -> "ScalarField":
        return ScalarField(grid, fn(*grid.meshes()))

    @staticmethod
    def full(grid: Grid, value: float) -> "ScalarField":
        return ScalarField(grid, np.full(grid.shape, float(value)))

    def finite_mask(self) -> np.ndarray:
        return np.isfinite(self.values)

    def at(self, x) -> float:
        """Value at the node nearest to x."""
        return float(self.values[self.grid.nearest_index(x)])

    def same_grid(self, other: "ScalarField") -> None:
        if self.grid != other.grid:
            raise GridMismatchError("fields live on different grids")


def delta_min(x0, grid: Grid) -> ScalarField:
    """Tropical Dirac: 0 at the node nearest x0, +inf elsewhere.

    Neutral element of inf-convolution; ties snap to the lower index so the
    elementary-solution identity is exact on the grid.
    """
    idx = grid.nearest_index(x0)  # raises OutOfDomainError when outside
    values = np.full(grid.shape, INF)
    values[idx] = 0.0
    return ScalarField(grid, values)


def minplus_scalar_product(f: ScalarField, g: ScalarField) -> float:
    """(f, g) = inf_x { f(x) + g(x) }; +inf iff every node hits +inf."""
    f.same_grid(g)
    return float(np.min(f.values + g.values))


def tropical_min_combine(f: ScalarField, lam: float, g: ScalarField, mu: float) -> ScalarField:
    """Pointwise min(lam + f, mu + g): the tropical linear combination."""
    f.same_grid(g)
    return ScalarField(f.grid, np.minimum(lam + f.values, mu + g.values))


def inf_convolution(
    f: ScalarField,
    kernel,
    out_grid: Grid | None = None,
    refine: bool = False,
    refine_iters: int = 60,
) -> ScalarField:
    """(f [] kernel)(x) = inf_y { f(y) + kernel(x, y) }, exact over nodes.

    ``kernel`` is either a vectorized callable k(x, y) -> extended real or an
    ActionKernel from hjflow.actions (which the compiled backend evaluates in
    closed form).  The default is the exact O(N^2) node scan; with
    ``refine=True`` each output node additionally runs a golden-section
    search over the bracket around the best input node, with f interpolated
    linearly (skipped next to +inf nodes so delta_min inputs stay exact).
    Refinement never increases a value: the result is min(scan, refined).
    """
    out_grid = out_grid or f.grid
    if out_grid.ndim != f.grid.ndim:
        raise GridMismatchError("output grid dimensionality differs from input")
    if f.grid.ndim == 1:
        out = kernels.infconv_1d(
            f.values, out_grid.axis(0), f.grid.axis(0), kernel,
            refine=refine, refine_iters=refine_iters,
        )
        return ScalarField(out_grid, out)
    return ScalarField(
        out_grid,
        kernels.infconv_2d(
            f.values, out_grid, f.grid, kernel, refine=refine, refine_iters=refine_iters
        ),
    )

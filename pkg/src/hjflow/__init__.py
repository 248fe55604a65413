"""hjflow: min-plus Hamilton-Jacobi action solvers and their quantum limits.

Classical side: Euler-Lagrange actions (closed form and direct minimization),
the Hopf-Lax/inf-convolution solver for Hamilton-Jacobi action fields, and
characteristic transport of particle ensembles.  Quantum side: split-step
Schrodinger evolution with adjustable hbar, propagator-based evolution for
quadratic Lagrangians, Madelung decomposition, coherent states, and Bohmian
trajectories.  The convergence module sweeps hbar downward and measures the
approach of the quantum fields/trajectories to their classical counterparts.
"""

__version__ = "0.1.0"

from .minplus import (  # noqa: F401
    INF,
    Grid,
    ScalarField,
    delta_min,
    inf_convolution,
    minplus_scalar_product,
    tropical_min_combine,
)
from .actions import (  # noqa: F401
    FreePotential,
    HarmonicPotential,
    LagrangianSpec,
    LinearPotential,
    TabulatedPotential,
    Trajectory,
    closed_action_kernel,
    deterministic_action,
    el_action_closed,
    el_action_numeric,
    optimal_trajectory_linear,
)

"""Exception types shared across the package."""


class HJFlowError(Exception):
    """Base class for all hjflow errors."""


class GridMismatchError(HJFlowError):
    """Two fields that must share a grid do not."""


class OutOfDomainError(HJFlowError):
    """A position lies outside the grid bounds."""


class InvalidHorizonError(HJFlowError):
    """A propagation time t <= 0 was requested."""


class CausticError(HJFlowError):
    """Harmonic action evaluated at a focal time (omega*t multiple of pi)."""


class UnsupportedPotentialError(HJFlowError):
    """No closed form exists for the requested potential."""


class ConvergenceError(HJFlowError):
    """Iterative minimizer failed to reach its stationarity tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StabilityError(HJFlowError):
    """Time step too large: conserved quantity drifted beyond its bound."""


class ResolutionError(HJFlowError):
    """Grid or time step cannot resolve the oscillation/flow it must carry.

    ``required`` carries a suggestion (e.g. minimum node count) when one can
    be estimated.
    """

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class TemporalResolutionError(HJFlowError):
    """Not enough time slices to bracket a probe time."""


class BoundaryBreachError(HJFlowError):
    """Wavefunction mass reaching the grid boundary exceeded the error bound."""


class DegenerateStateError(HJFlowError):
    """Density mask is empty; no node carries usable probability."""


class SamplingError(HJFlowError):
    """Probability density unusable for sampling (zero or negative mass)."""


class StatisticalPowerError(HJFlowError):
    """Too few valid particles for the requested statistic."""


class ConfigError(HJFlowError):
    """Base class for configuration problems."""


class ConfigParseError(ConfigError):
    """Config text could not be parsed (exit code 2)."""


class ConfigValidationError(ConfigError):
    """Config parsed but violates the scenario schema (exit code 3)."""

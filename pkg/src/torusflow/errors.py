"""Exception taxonomy.

The CLI maps these onto exit codes: configuration problems -> 2,
flow degeneration -> 3.  Check failures are reported as results,
not exceptions.
"""


class TorusFlowError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(TorusFlowError):
    """Invalid configuration, mismatched grids, or malformed input."""


class ValidationError(ConfigurationError):
    """A field violates its structural invariants (symmetry, finiteness, ...)."""


class NonInvertibleMetricError(TorusFlowError):
    """Metric matrix is singular (condition number above 1e12) at some point."""


class DegeneratePerturbationError(TorusFlowError):
    """bg + h stopped being positive definite."""


class FlowDegenerationError(TorusFlowError):
    """Positive definiteness was lost during time stepping.

    Carries the offending grid point (multi-index) and flow time.
    """

    def __init__(self, message, point=None, time=None):
        super().__init__(message)
        self.point = point
        self.time = time


class HorizonError(TorusFlowError):
    """Step size collapsed below the hard floor; horizon unreachable."""


class StepSizeError(TorusFlowError):
    """ODE step left the interpolation trust region."""


class FoldError(TorusFlowError):
    """The tracked diffeomorphism is not invertible at some grid point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DivergenceError(TorusFlowError):
    """Fixed-point iteration stopped contracting."""


class InsufficientDataError(TorusFlowError):
    """Not enough snapshots / samples to evaluate the requested quantity."""

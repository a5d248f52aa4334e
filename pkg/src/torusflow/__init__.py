"""Numerical laboratory for Ricci and Ricci-DeTurck flow on flat-torus grids.

Regularizes continuous (possibly non-smooth) initial metrics by parabolic
flow and evaluates weak pointwise lower scalar-curvature bounds via
geodesic-ball infima at shrinking radii.
"""

__version__ = "0.1.0"

from .errors import TorusFlowError
from .fields import MetricField, TensorField, flat_metric
from .grid import GridSpec

__all__ = [
    "GridSpec",
    "MetricField",
    "TensorField",
    "TorusFlowError",
    "flat_metric",
    "__version__",
]

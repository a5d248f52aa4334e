"""Small fitting helpers shared by the comparison tools and suites."""

import numpy as np

from .errors import InsufficientDataError


def fit_loglog(ts, vals):
    """Least-squares slope of log(vals) against log(ts) with a ~95% band.

    Returns (slope, lower, upper, intercept).  The band is slope +/- 2 se,
    with se from the regression residuals.
    """
    ts = np.asarray(ts, dtype=float)
    vals = np.asarray(vals, dtype=float)
    if ts.size < 3:
        raise InsufficientDataError("need at least 3 points for a slope fit")
    if np.any(ts <= 0) or np.any(vals <= 0):
        raise InsufficientDataError("log-log fit needs positive data")
    x = np.log(ts)
    y = np.log(vals)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    resid = y - A @ coef
    dof = max(ts.size - 2, 1)
    sxx = float(np.sum((x - x.mean()) ** 2))
    se = float(np.sqrt(np.sum(resid**2) / dof / sxx)) if sxx > 0 else np.inf
    return slope, slope - 2.0 * se, slope + 2.0 * se, intercept

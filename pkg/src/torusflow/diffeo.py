"""Diffeomorphism tracking along a Ricci-DeTurck trajectory.

Integrating the ODE  d chi_t(x)/dt = X(chi_t(x), t)  with X the gauge
vector field turns the Ricci-DeTurck flow back into a Ricci flow: the
pushforward (chi_t)_* g_t solves the ungauged equation.  The anchor time
t0 carries chi_{t0} = id; integration runs backward toward small t and
forward toward T.  The observable certifying small-time convergence is
the tracer diameter diam{chi_s(x) : s <= t}, expected to scale like
sqrt(t).
"""

import bisect
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from .errors import (
    ConfigurationError,
    FoldError,
    InsufficientDataError,
    StepSizeError,
)
from .fields import MetricField, same_grid
from .geometry import deturck_field
from .grid import partial1

# Advection sub-steps keep displacement per step below this fraction of h.
_TRUST_FRACTION = 0.5
_MAX_SUBSTEPS = 100000
_INVERSE_ITERS = 20


@dataclass
class DiffeoTrack:
    """Gauge-map samples chi_t on the full grid.

    displacements[t] holds chi_t(x) - x (continuous, unwrapped) with shape
    grid_shape + (dim,); positions at the anchor time equal the grid
    coordinates exactly.
    """

    grid: object
    t0: float
    sample_times: tuple
    displacements: dict = field(default_factory=dict)

    def positions(self, t):
        u = self.displacements[self._key(t)]
        return self.grid.coords() + u

    def _key(self, t):
        for s in self.sample_times:
            if abs(s - t) <= 1e-12 * max(1.0, abs(t)):
                return s
        raise InsufficientDataError(f"no track sample at t={t}")


def _interp_field(comp_fields, pts, grid):
    """Cubic periodic interpolation of per-component grid fields at points.

    pts: (P, dim) torus points; comp_fields: list of grid-shaped arrays.
    Returns (P, len(comp_fields)).
    """
    idx = (grid.wrap(pts) / grid.h).T  # (dim, P) in index units
    cols = [
        map_coordinates(f, idx, order=3, mode="grid-wrap") for f in comp_fields
    ]
    return np.stack(cols, axis=-1)


class _GaugeField:
    """Time-interpolated gauge vector field along a trajectory."""

    def __init__(self, traj):
        self.states = sorted(traj.states, key=lambda s: s.t)
        if len(self.states) < 2:
            raise InsufficientDataError("need at least two snapshots to track")
        self.times = [s.t for s in self.states]
        self.grid = self.states[0].g.grid
        self._x_cache = {}

    def _x_at_index(self, i):
        if i not in self._x_cache:
            st = self.states[i]
            self._x_cache[i] = deturck_field(st.g, st.bg).data
        return self._x_cache[i]

    def max_norm(self, t):
        x = self.field(t)
        return float(np.max(np.abs(x)))

    def field(self, t):
        """Linear-in-time interpolation of X between snapshots."""
        ts = self.times
        if t <= ts[0]:
            return self._x_at_index(0)
        if t >= ts[-1]:
            return self._x_at_index(len(ts) - 1)
        i = bisect.bisect_right(ts, t) - 1
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        return (1.0 - w) * self._x_at_index(i) + w * self._x_at_index(i + 1)

    def at_points(self, pts, t):
        xf = self.field(t)
        comps = [xf[..., a] for a in range(self.grid.dim)]
        return _interp_field(comps, pts, self.grid)


def _advect(pts, gauge, t_from, t_to):
    """RK2 advection of points from t_from to t_to with adaptive substeps."""
    grid = gauge.grid
    span = t_to - t_from
    if span == 0.0:
        return pts
    xmax = max(gauge.max_norm(t_from), gauge.max_norm(t_to), 1e-30)
    m = int(np.ceil(abs(span) * xmax / (_TRUST_FRACTION * grid.h)))
    m = max(m, 1)
    if m > _MAX_SUBSTEPS:
        raise StepSizeError(
            f"advection from t={t_from:g} to {t_to:g} needs {m} substeps "
            f"(|X| ~ {xmax:g}); trajectory too coarse"
        )
    dt = span / m
    t = t_from
    for _ in range(m):
        k1 = gauge.at_points(pts, t)
        k2 = gauge.at_points(pts + dt * k1, t + dt)
        pts = pts + 0.5 * dt * (k1 + k2)
        t += dt
    return pts


def integrate_chi(traj, t0, sample_times) -> DiffeoTrack:
    """Integrate the gauge ODE from the anchor chi_{t0} = id.

    Runs backward from t0 toward the smallest sample time and forward
    toward the largest, recording full-grid displacement fields.
    """
    gauge = _GaugeField(traj)
    grid = gauge.grid
    ts = sorted(float(t) for t in sample_times)
    if not ts or ts[0] <= 0:
        raise ConfigurationError("sample times must be positive")
    if not gauge.times[0] - 1e-12 <= t0 <= gauge.times[-1] + 1e-12:
        raise ConfigurationError(f"anchor t0={t0} outside trajectory range")
    track = DiffeoTrack(grid=grid, t0=float(t0), sample_times=tuple(ts))
    base = grid.coords().reshape(-1, grid.dim)

    def store(t, pts):
        track.displacements[t] = (pts - base).reshape(grid.shape + (grid.dim,))

    back = [t for t in ts if t < t0]
    fwd = [t for t in ts if t >= t0]
    pts = base.copy()
    t_cur = t0
    for t in reversed(back):
        pts = _advect(pts, gauge, t_cur, t)
        t_cur = t
        store(t, pts)
    pts = base.copy()
    t_cur = t0
    for t in fwd:
        pts = _advect(pts, gauge, t_cur, t)
        t_cur = t
        store(t, pts)
    return track


def pushforward_metric(g: MetricField, track: DiffeoTrack, t) -> MetricField:
    """Resample the pushforward (chi_t)_* g on the grid.

    For each grid point y, invert chi_t by fixed-point iteration on the
    displacement, then apply inverse-Jacobian chain rule:
    ((chi)_* g)(y) = A^{-T} g(x) A^{-1} with A = D chi(x), x = chi^{-1}(y).
    """
    grid = same_grid(g)
    if track.grid != grid:
        raise ConfigurationError("track and metric use different grids")
    n = grid.dim
    u = track.displacements[track._key(t)]
    du = np.stack(
        [partial1(u, a, grid) for a in range(n)], axis=grid.dim
    )  # du[..., a, i] = d_a u_i
    jac = np.eye(n) + np.swapaxes(du, -1, -2)  # J[..., i, j] = d_j chi^i
    detj = np.linalg.det(jac)
    if np.min(detj) <= 0.0:
        idx = np.unravel_index(int(np.argmin(detj)), grid.shape)
        raise FoldError(
            f"chi_t folds at grid point {idx} (det D chi = {np.min(detj):g})",
            point=idx,
        )
    ucomps = [u[..., i] for i in range(n)]
    y = grid.coords().reshape(-1, n)
    x = y.copy()
    for _ in range(_INVERSE_ITERS):
        x = y - _interp_field(ucomps, x, grid)
    ducomps = [du[..., a, i] for a in range(n) for i in range(n)]
    du_x = _interp_field(ducomps, x, grid).reshape(-1, n, n)  # [p, a, i]
    A = np.eye(n) + np.swapaxes(du_x, -1, -2)  # A[p, i, j] = d_j chi^i at x
    gcomps = [g.data[..., i, j] for i in range(n) for j in range(n)]
    g_x = _interp_field(gcomps, x, grid).reshape(-1, n, n)
    g_x = 0.5 * (g_x + np.swapaxes(g_x, -1, -2))
    B = np.linalg.inv(A)
    out = np.einsum("pki,pkl,plj->pij", B, g_x, B)
    out = 0.5 * (out + np.swapaxes(out, -1, -2))
    return MetricField(grid, out.reshape(grid.shape + (n, n)))


def pullback_metric(g: MetricField, track: DiffeoTrack, t) -> MetricField:
    """Resample the pullback (chi_t)^* g on the grid (no map inversion):
    ((chi)^* g)_ij(x) = g_kl(chi(x)) J^k_i J^l_j with J = D chi(x)."""
    grid = same_grid(g)
    if track.grid != grid:
        raise ConfigurationError("track and metric use different grids")
    n = grid.dim
    u = track.displacements[track._key(t)]
    du = np.stack([partial1(u, a, grid) for a in range(n)], axis=grid.dim)
    jac = (np.eye(n) + np.swapaxes(du, -1, -2)).reshape(-1, n, n)
    pts = (grid.coords() + u).reshape(-1, n)
    gcomps = [g.data[..., i, j] for i in range(n) for j in range(n)]
    g_chi = _interp_field(gcomps, pts, grid).reshape(-1, n, n)
    g_chi = 0.5 * (g_chi + np.swapaxes(g_chi, -1, -2))
    out = np.einsum("pki,pkl,plj->pij", jac, g_chi, jac)
    out = 0.5 * (out + np.swapaxes(out, -1, -2))
    return MetricField(grid, out.reshape(grid.shape + (n, n)))


def choose_anchor(traj, threshold=0.1):
    """Earliest reliable snapshot time: the first t whose metric satisfies
    |grad^2 (g - bg)| * (grid spacing)^2 < threshold, i.e. second
    differences are resolved.  Falls back to the last snapshot."""
    from .flow import _deriv_norms

    grid = traj.states[0].g.grid
    for st in sorted(traj.states, key=lambda s: s.t):
        if st.t <= 0.0:
            continue
        _, hess = _deriv_norms(st.h.data, grid)
        if hess * grid.h ** 2 < threshold:
            return st.t
    return max(s.t for s in traj.states)


@dataclass
class PulledBackFlow:
    """The reconstructed Ricci flow: pushforwards of g_t along chi_t."""

    times: tuple
    metrics: list


def pulled_back_flow(traj, track: DiffeoTrack, times) -> PulledBackFlow:
    metrics = []
    for t in times:
        st = traj.state_at(t)
        metrics.append(pushforward_metric(st.g, track, t))
    return PulledBackFlow(times=tuple(times), metrics=metrics)


def tracer_diameter(track: DiffeoTrack, x_index, t):
    """Diameter of {chi_s(x) : s <= t} in the flat background distance.

    `x_index` is a grid multi-index of the tracer.  Requires at least 16
    samples per dyadic decade of (t_min, t].
    """
    grid = track.grid
    ts = [s for s in track.sample_times if s <= t + 1e-12]
    if not ts:
        raise InsufficientDataError(f"no samples at or below t={t}")
    lo, hi = ts[0], ts[-1]
    edge = hi
    while edge / 2.0 >= lo * (1.0 - 1e-12):
        inside = sum(1 for s in ts if edge / 2.0 <= s <= edge)
        if inside < 16:
            raise InsufficientDataError(
                f"only {inside} samples in dyadic decade [{edge / 2.0:g}, "
                f"{edge:g}]; need >= 16"
            )
        edge /= 2.0
    flat_idx = np.ravel_multi_index(tuple(x_index), grid.shape)
    pts = np.array(
        [
            track.displacements[s].reshape(-1, grid.dim)[flat_idx]
            for s in ts
        ]
    ) + grid.coords().reshape(-1, grid.dim)[flat_idx]
    d = grid.distance_flat(pts[:, None, :], pts[None, :, :])
    return float(np.max(d))

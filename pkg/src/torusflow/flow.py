"""Time stepping for Ricci flow, Ricci-DeTurck flow, and the perturbation
equation, with scalar-curvature bound monitoring.

Two independent code paths advance the same continuum object: the direct
Ricci-DeTurck stepper (ground truth) and the perturbation stepper built on
the linear operator plus quadratic terms.  They are used as mutual oracles;
a divergence beyond O(dt + h^4) localizes an index error in the quadratic
terms.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    FlowDegenerationError,
    HorizonError,
    InsufficientDataError,
)
from .fields import (
    EIGENVALUE_FLOOR,
    MetricField,
    TensorField,
    operator_norm_gap,
    same_grid,
    sym_eigenvalue_range,
)
from .geometry import (
    BackgroundGeometry,
    _christoffel_raw,
    _metric_partials,
    _ricci_raw,
    curvature,
    q_terms,
    lichnerowicz_L,
)
from .fields import sym_inverse
from .grid import partial1, partial2

DT_FLOOR = 1e-12

SCHEMES = ("explicit-rk2", "explicit-euler")


@dataclass
class StepperConfig:
    scheme: str = "explicit-rk2"
    cfl_safety: float = 0.25
    T: float = 0.1
    snapshot_times: tuple = ()
    series_stride: int = 10
    eps_run: float = 0.1
    track_derivatives: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ConfigurationError("cfl_safety must be in (0, 1]")
        if not self.T > 0:
            raise ConfigurationError("T must be positive")


class FlowState:
    """One point on a flow trajectory: time, full metric, background, and
    the cached perturbation h = g - bg."""

    def __init__(self, t, g: MetricField, bg: MetricField):
        same_grid(g, bg)
        self.t = float(t)
        self.g = g
        self.bg = bg
        self._h = None
        self._report = None

    @property
    def h(self):
        if self._h is None:
            self._h = TensorField(
                self.g.grid, (2, 0), self.g.data - self.bg.data, check=False
            )
        return self._h

    @property
    def report(self):
        if self._report is None:
            self._report = curvature(self.g)
        return self._report


@dataclass
class FlowTrajectory:
    states: list = field(default_factory=list)
    dt_history: list = field(default_factory=list)
    min_scalar_series: list = field(default_factory=list)  # (t, min R)
    max_scalar_series: list = field(default_factory=list)  # (t, max R)
    deriv_norm_series: list = field(default_factory=list)  # (t, |dh|_inf, |d2h|_inf)

    @property
    def times(self):
        return [s.t for s in self.states]

    def state_at(self, t, tol=1e-9):
        for s in self.states:
            if abs(s.t - t) <= tol * max(1.0, abs(t)):
                return s
        raise InsufficientDataError(f"no snapshot at t={t}")

    def series_rows(self):
        """Rows (t, dt, min_R, max_R, grad_h_inf, hess_h_inf)."""
        rows = []
        dmap = {round(t, 15): (gn, hn) for t, gn, hn in self.deriv_norm_series}
        dts = dict(zip([t for t, _ in self.min_scalar_series], self.dt_history))
        for (t, mn), (_, mx) in zip(self.min_scalar_series, self.max_scalar_series):
            gn, hn = dmap.get(round(t, 15), (np.nan, np.nan))
            rows.append((t, dts.get(t, np.nan), mn, mx, gn, hn))
        return rows


def _check_pd(gdata, grid, t):
    if grid.dim == 3:
        from ._fastpath import HAVE_NUMBA, eig_range3

        if HAVE_NUMBA:
            m, mx, loc = eig_range3(gdata)
            if not np.isfinite(m) or m < EIGENVALUE_FLOOR:
                idx = np.unravel_index(int(loc), grid.shape)
                raise FlowDegenerationError(
                    f"metric degenerated at point {idx}, t={t:g} (min eig {m:g})",
                    point=idx,
                    time=t,
                )
            return float(m), float(mx)
    emin, emax = sym_eigenvalue_range(gdata)
    m = float(np.min(emin))
    if not np.isfinite(m) or m < EIGENVALUE_FLOOR:
        idx = np.unravel_index(int(np.argmin(emin)), grid.shape)
        raise FlowDegenerationError(
            f"metric degenerated at point {idx}, t={t:g} (min eig {m:g})",
            point=idx,
            time=t,
        )
    return m, float(np.max(emax))


def cfl_dt(g: MetricField, cfl_safety=0.25):
    """Parabolic step bound: safety * h^2 / (2 n max_pt lambda_max(g^{-1}))."""
    grid = g.grid
    if g.min_eigenvalue is None:
        g.validate()
    lam_max_inv = 1.0 / g.min_eigenvalue
    return cfl_safety * grid.h ** 2 / (2.0 * grid.dim * lam_max_inv)


def _rdt_rhs(gdata, grid, bg_geo, allow_fast=True):
    """Right side of the Ricci-DeTurck equation: -2 Ric(g) - L_X g."""
    if allow_fast and grid.dim == 3 and bg_geo.flat and bg_geo.gam is None:
        from ._fastpath import HAVE_NUMBA, rdt_rhs_flat3

        if HAVE_NUMBA:
            return rdt_rhs_flat3(gdata, grid.h)
    ginv = sym_inverse(gdata)
    gam, dg = _christoffel_raw(gdata, ginv, grid)
    ric = _ricci_raw(gam, grid)
    gam_bg = bg_geo.gam
    if gam_bg is None:
        x = -np.einsum("...ij,...kij->...k", ginv, gam)
    else:
        x = np.einsum("...ij,...kij->...k", ginv, gam_bg - gam)
    dX = np.stack([partial1(x, a, grid) for a in range(grid.dim)], axis=grid.dim)
    lie = (
        np.einsum("...k,...kij->...ij", x, dg)
        + np.einsum("...kj,...ik->...ij", gdata, dX)
        + np.einsum("...ik,...jk->...ij", gdata, dX)
    )
    return -2.0 * ric - lie


def _ricci_rhs(gdata, grid):
    ginv = sym_inverse(gdata)
    gam, _ = _christoffel_raw(gdata, ginv, grid)
    return -2.0 * _ricci_raw(gam, grid)


def _advance(y, rhs, dt, scheme):
    k1 = rhs(y)
    if scheme == "explicit-euler":
        return y + dt * k1
    k2 = rhs(y + dt * k1)
    return y + 0.5 * dt * (k1 + k2)


def step_ricci(bg: MetricField, dt, scheme="explicit-rk2"):
    """One explicit step of the Ricci flow d_t bg = -2 Ric(bg)."""
    grid = bg.grid
    if BackgroundGeometry(bg).flat:
        return bg  # fixed point; avoids spurious roundoff drift
    out = _advance(bg.data, lambda y: _ricci_rhs(y, grid), dt, scheme)
    _check_pd(out, grid, dt)
    return MetricField(grid, out, check=False)


def step_rdt(state: FlowState, dt, scheme="explicit-rk2", bg_geo=None):
    """Advance the Ricci-DeTurck metric and its background together."""
    grid = state.g.grid
    if bg_geo is None or bg_geo.bg is not state.bg:
        bg_geo = BackgroundGeometry(state.bg)
    if bg_geo.flat:
        new_bg = state.bg
        gnew = _advance(state.g.data, lambda y: _rdt_rhs(y, grid, bg_geo), dt, scheme)
    else:
        # advance the coupled pair (g, bg) with the same scheme and dt
        def rhs(pair):
            g, bgd = pair
            geo = BackgroundGeometry(MetricField(grid, bgd, check=False))
            return np.stack([_rdt_rhs(g, grid, geo), _ricci_rhs(bgd, grid)])

        pair = np.stack([state.g.data, state.bg.data])
        out = _advance(pair, rhs, dt, scheme)
        gnew, bgd = out[0], out[1]
        _check_pd(bgd, grid, state.t + dt)
        new_bg = MetricField(grid, bgd, check=False)
    mn, mx = _check_pd(gnew, grid, state.t + dt)
    gfield = MetricField(grid, gnew, check=False)
    gfield.min_eigenvalue, gfield.max_eigenvalue = mn, mx
    return FlowState(state.t + dt, gfield, new_bg)


def step_perturbation(state: FlowState, dt, scheme="explicit-rk2", bg_geo=None):
    """Advance h by d_t h = L h + Q0 + div(Q1_flux), bg by Ricci flow."""
    grid = state.g.grid
    if bg_geo is None or bg_geo.bg is not state.bg:
        bg_geo = BackgroundGeometry(state.bg)
    if not bg_geo.flat:
        raise ConfigurationError(
            "perturbation stepper supports flat backgrounds only"
        )

    def rhs(hdata):
        hfield = TensorField(grid, (2, 0), hdata, check=False)
        lin = lichnerowicz_L(hfield, state.bg, background=bg_geo)
        q0, flux = q_terms(hfield, state.bg, background=bg_geo)
        return lin.data + q0.data + bg_geo.divergence_flux(flux.data)

    hnew = _advance(state.h.data, rhs, dt, scheme)
    gnew = state.bg.data + hnew
    mn, mx = _check_pd(gnew, grid, state.t + dt)
    gfield = MetricField(grid, gnew, check=False)
    gfield.min_eigenvalue, gfield.max_eigenvalue = mn, mx
    return FlowState(state.t + dt, gfield, state.bg)


_SOLVERS = {"rdt": step_rdt, "perturbation": step_perturbation}


def _deriv_norms(hdata, grid):
    n = grid.dim
    gn = max(
        float(np.max(np.abs(partial1(hdata, a, grid)))) for a in range(n)
    )
    hn = max(
        float(np.max(np.abs(partial2(hdata, a, b, grid))))
        for a in range(n)
        for b in range(a, n)
    )
    return gn, hn


def integrate(g0: MetricField, bg0: MetricField, stepper: StepperConfig,
              solver="rdt"):
    """Integrate a flow to time T, snapshotting at requested times.

    `solver` is "rdt", "perturbation", or "ricci" (background-only run
    with g = bg, used for scalar-evolution residual studies).
    """
    grid = same_grid(g0, bg0)
    if solver == "ricci":
        g0 = bg0
    elif solver not in _SOLVERS:
        raise ConfigurationError(f"unknown solver {solver!r}")
    gap = operator_norm_gap(g0, bg0)
    if solver != "ricci" and gap > stepper.eps_run:
        raise ConfigurationError(
            f"initial C0 gap {gap:g} exceeds eps_run={stepper.eps_run:g}"
        )

    snap_times = sorted(set(float(t) for t in stepper.snapshot_times if t <= stepper.T))
    if not snap_times or snap_times[-1] < stepper.T:
        snap_times.append(stepper.T)
    traj = FlowTrajectory()
    state = FlowState(0.0, g0, bg0)

    def record(state, dt, with_derivs):
        rep_scalar = None
        from .geometry import scalar_curvature

        rep_scalar = scalar_curvature(state.g)
        traj.min_scalar_series.append((state.t, float(np.min(rep_scalar))))
        traj.max_scalar_series.append((state.t, float(np.max(rep_scalar))))
        traj.dt_history.append(dt)
        if with_derivs and stepper.track_derivatives:
            gn, hn = _deriv_norms(state.h.data, grid)
            traj.deriv_norm_series.append((state.t, gn, hn))

    record(state, 0.0, True)
    if snap_times and snap_times[0] <= 0.0:
        traj.states.append(state)

    pending = [t for t in snap_times if t > 0.0]
    nstep = 0
    geo_cache = None
    while state.t < stepper.T - 1e-14:
        if state.g.min_eigenvalue is not None:
            lam_min = state.g.min_eigenvalue
        else:
            emin, _ = sym_eigenvalue_range(state.g.data)
            lam_min = float(np.min(emin))
        dt = stepper.cfl_safety * grid.h ** 2 * lam_min / (2.0 * grid.dim)
        if dt < DT_FLOOR:
            raise HorizonError(
                f"step size {dt:g} collapsed below {DT_FLOOR:g} at t={state.t:g}"
            )
        t_next = pending[0] if pending else stepper.T
        hit = False
        if state.t + dt >= t_next - 1e-14:
            dt = t_next - state.t
            hit = True
        if solver == "ricci":
            new_bg = step_ricci(state.bg, dt, stepper.scheme)
            state = FlowState(state.t + dt, new_bg, new_bg)
        else:
            if geo_cache is None or geo_cache.bg is not state.bg:
                geo_cache = BackgroundGeometry(state.bg)
            state = _SOLVERS[solver](state, dt, stepper.scheme, bg_geo=geo_cache)
        if hit:
            state.t = t_next  # kill accumulated roundoff in the clock
        nstep += 1
        at_snap = hit and pending and abs(state.t - pending[0]) < 1e-12
        if at_snap or nstep % stepper.series_stride == 0:
            record(state, dt, True)
        if at_snap:
            traj.states.append(state)
            pending.pop(0)
    return traj


def run_flow(config):
    """Execute a full experiment config: generate initial data and integrate.

    Accepts an ExperimentConfig (see torusflow.config); returns the
    trajectory.  Deterministic given the config.
    """
    from .config import ExperimentConfig
    from .generators import generate_metric
    from .fields import flat_metric

    if not isinstance(config, ExperimentConfig):
        raise ConfigurationError("run_flow expects an ExperimentConfig")
    grid = config.grid_spec()
    g0 = generate_metric(config.generator_spec(), grid)
    bg0 = flat_metric(grid)
    return integrate(g0, bg0, config.stepper_config(), solver=config.solver)


def scalar_evolution_residual(traj: FlowTrajectory, i: int):
    """Residual d_t R - Lap^{bg} R - 2|Ric|^2 on the background trajectory.

    Centered (non-uniform) time differencing across snapshots i-1, i, i+1.
    Returns the residual field; callers typically report its max norm.
    """
    if i < 1 or i + 1 >= len(traj.states):
        raise InsufficientDataError("need snapshots at i-1, i, i+1")
    sm, s0, sp = traj.states[i - 1], traj.states[i], traj.states[i + 1]
    grid = s0.bg.grid
    n = grid.dim

    def scal_and_geo(st):
        rep = curvature(st.bg)
        return rep.scalar, rep

    Rm_, _ = scal_and_geo(sm)
    R0, rep0 = scal_and_geo(s0)
    Rp_, _ = scal_and_geo(sp)
    dp = sp.t - s0.t
    dm = s0.t - sm.t
    dtR = (dm * dm * Rp_ + (dp * dp - dm * dm) * R0 - dp * dp * Rm_) / (
        dp * dm * (dp + dm)
    )
    inv = s0.bg.inverse()
    gam = rep0.christoffel.data
    d2 = np.stack(
        [
            np.stack([partial2(R0, a, b, grid) for b in range(n)], axis=-1)
            for a in range(n)
        ],
        axis=-2,
    )
    dR = np.stack([partial1(R0, a, grid) for a in range(n)], axis=-1)
    lap = np.einsum("...ab,...ab->...", inv, d2) - np.einsum(
        "...ab,...cab,...c->...", inv, gam, dR
    )
    ric = rep0.ricci.data
    ric2 = np.einsum("...ip,...jq,...ij,...pq->...", inv, inv, ric, ric)
    return dtR - lap - 2.0 * ric2

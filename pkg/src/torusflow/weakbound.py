"""Weak pointwise lower scalar-curvature bounds.

A continuous metric g0 has scalar curvature bounded below by kappa at y in
the beta-weak sense when

    inf_{C > 0}  liminf_{t -> 0}  inf_{B_{g(t)}(y, C t^beta)} R(g(t))  >= kappa,

evaluated along the regularizing flow with 0 < beta < 1/2.  Numerically the
liminf is proxied by the minimum over the three smallest sampled times
(conservative: it under-estimates, so passes are trustworthy) and the outer
inf by a finite C scan; the report flags when the scan minimizer sits at an
endpoint of the C grid.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import ConfigurationError, InsufficientDataError
from .fields import MetricField

DEFAULT_BETA = 0.4
DEFAULT_C_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)


def tol_wb(kappa):
    """Hybrid relative-absolute tolerance, shared with the flow monitors."""
    return 0.05 * (1.0 + abs(kappa))


def default_t_grid(snapshot_times, lo=1e-4, hi=1e-1):
    """Decreasing dyadic selection of snapshot times within [lo, hi]."""
    ts = sorted(t for t in snapshot_times if lo * (1 - 1e-9) <= t <= hi * (1 + 1e-9))
    return tuple(reversed(ts))


@dataclass
class GeodesicDistanceField:
    source: np.ndarray
    source_index: tuple
    g: MetricField
    dist: np.ndarray
    snap_offset: float


def _neighbor_offsets(n):
    """Half of the 8- (n=2) / 26- (n=3) neighborhood; each undirected edge
    is added once."""
    offs = []
    for o in np.ndindex(*((3,) * n)):
        o = np.array(o) - 1
        if not np.any(o):
            continue
        # keep lexicographically positive representatives only
        first = next(v for v in o if v != 0)
        if first > 0:
            offs.append(o)
    return offs


def _edge_graph(g: MetricField):
    """Sparse weighted grid graph: weight = sqrt(dx^T g_mid dx) with g_mid
    the average of the endpoint metrics."""
    grid = g.grid
    n = grid.dim
    P = grid.npoints
    idx = np.arange(P).reshape(grid.shape)
    rows, cols, weights = [], [], []
    for o in _neighbor_offsets(n):
        nbr = np.roll(idx, shift=tuple(-o), axis=tuple(range(n)))
        g_nbr = np.roll(g.data, shift=tuple(-o), axis=tuple(range(n)))
        gmid = 0.5 * (g.data + g_nbr)
        dx = o * grid.h
        w = np.sqrt(np.einsum("i,...ij,j->...", dx, gmid, dx))
        rows.append(idx.ravel())
        cols.append(nbr.ravel())
        weights.append(w.ravel())
    return coo_matrix(
        (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))),
        shape=(P, P),
    ).tocsr()


def geodesic_distance(g: MetricField, y) -> GeodesicDistanceField:
    """Dijkstra distance field of g from y (snapped to the nearest grid
    point, offset recorded)."""
    grid = g.grid
    y = grid.wrap(np.asarray(y, dtype=float))
    src_idx = tuple(int(round(c / grid.h)) % grid.points_per_axis for c in y)
    snapped = np.array(src_idx) * grid.h
    offset = float(grid.distance_flat(y, snapped))
    graph = _edge_graph(g)
    flat_src = int(np.ravel_multi_index(src_idx, grid.shape))
    dist = dijkstra(graph, directed=False, indices=flat_src)
    return GeodesicDistanceField(
        source=snapped,
        source_index=src_idx,
        g=g,
        dist=dist.reshape(grid.shape),
        snap_offset=offset,
    )


def ball_inf_scalar(traj, y, C, beta, t, _cache=None) -> float:
    """inf of R(g_t) over the g_t-geodesic ball of radius C t^beta about y.

    The ball always contains y itself.  `_cache` maps (point, time) to a
    (GeodesicDistanceField, scalar field) pair to amortize Dijkstra runs.
    """
    if C <= 0:
        raise ConfigurationError("C must be positive")
    st = traj.state_at(t)
    key = (tuple(np.round(np.asarray(y, dtype=float), 12)), t)
    if _cache is not None and key in _cache:
        df, scal = _cache[key]
    else:
        from .geometry import scalar_curvature

        df = geodesic_distance(st.g, y)
        scal = scalar_curvature(st.g)
        if _cache is not None:
            _cache[key] = (df, scal)
    radius = C * t ** beta
    mask = df.dist <= radius
    mask[df.source_index] = True
    return float(np.min(scal[mask]))


@dataclass
class WeakBoundEstimate:
    point: np.ndarray
    beta: float
    C_grid: tuple
    t_grid: tuple
    ball_inf: np.ndarray  # shape (len(C_grid), len(t_grid))
    per_C_liminf: np.ndarray
    estimate: float
    minimizing_C: float
    endpoint_C: bool
    kappa_test: dict = field(default=None)

    def report(self):
        lines = [
            f"weak lower bound at y = {np.array2string(self.point, precision=4)}"
            f"  (beta = {self.beta})",
            "   C \\ t  " + "  ".join(f"{t:9.3e}" for t in self.t_grid),
        ]
        for ci, C in enumerate(self.C_grid):
            row = "  ".join(f"{v:9.4f}" for v in self.ball_inf[ci])
            lines.append(f"  C={C:<6g} {row}   liminf~ {self.per_C_liminf[ci]:.4f}")
        lines.append(
            f"  estimate = {self.estimate:.4f} (minimizing C = {self.minimizing_C:g}"
            + (", at grid endpoint)" if self.endpoint_C else ")")
        )
        if self.kappa_test is not None:
            k = self.kappa_test
            lines.append(
                f"  kappa test: estimate >= {k['kappa']:g} - {k['tol']:g}: "
                + ("PASS" if k["passed"] else "FAIL")
            )
        return "\n".join(lines)


def weak_lower_bound(
    traj,
    y,
    beta=DEFAULT_BETA,
    C_grid=DEFAULT_C_GRID,
    t_grid=None,
    kappa=None,
    _cache=None,
) -> WeakBoundEstimate:
    """Evaluate the beta-weak lower-bound estimate at a point.

    The liminf proxy is the min over the three smallest sampled times, the
    outer inf a scan over C_grid; optionally tests against a target kappa
    with the shared hybrid tolerance.
    """
    if not 0.0 < beta < 0.5:
        raise ConfigurationError("beta must lie in (0, 1/2)")
    if t_grid is None:
        t_grid = default_t_grid([s.t for s in traj.states])
    t_grid = tuple(float(t) for t in t_grid)
    if len(t_grid) < 6:
        raise InsufficientDataError("t_grid needs at least 6 entries")
    if any(t_grid[i] <= t_grid[i + 1] for i in range(len(t_grid) - 1)):
        raise ConfigurationError("t_grid must be strictly decreasing")
    if t_grid[0] / t_grid[-1] < 100.0 * (1 - 1e-9):
        raise InsufficientDataError("t_grid must span at least two decades")
    C_grid = tuple(float(c) for c in C_grid)
    if len(C_grid) < 4:
        raise InsufficientDataError("C_grid needs at least 4 entries")
    y = np.asarray(y, dtype=float)
    cache = _cache if _cache is not None else {}
    table = np.empty((len(C_grid), len(t_grid)))
    for ci, C in enumerate(C_grid):
        for ti, t in enumerate(t_grid):
            table[ci, ti] = ball_inf_scalar(traj, y, C, beta, t, _cache=cache)
    # liminf proxy: trailing-window min over the three smallest times
    per_C = np.min(table[:, -3:], axis=1)
    best = int(np.argmin(per_C))
    estimate = float(per_C[best])
    kt = None
    if kappa is not None:
        tol = tol_wb(kappa)
        kt = {"kappa": float(kappa), "tol": tol, "passed": estimate >= kappa - tol}
    return WeakBoundEstimate(
        point=y,
        beta=beta,
        C_grid=C_grid,
        t_grid=t_grid,
        ball_inf=table,
        per_C_liminf=per_C,
        estimate=estimate,
        minimizing_C=C_grid[best],
        endpoint_C=best in (0, len(C_grid) - 1),
        kappa_test=kt,
    )

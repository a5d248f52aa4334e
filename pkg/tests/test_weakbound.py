"""Geodesic distances and the weak lower-bound evaluator."""

import numpy as np
import pytest

from torusflow.errors import ConfigurationError, InsufficientDataError
from torusflow.fields import MetricField, flat_metric
from torusflow.flow import StepperConfig, integrate
from torusflow.generators import conformal_metric
from torusflow.grid import GridSpec
from torusflow.weakbound import (
    ball_inf_scalar,
    default_t_grid,
    geodesic_distance,
    tol_wb,
    weak_lower_bound,
)


def test_tolerance_is_hybrid():
    assert tol_wb(0.0) == pytest.approx(0.05)
    assert tol_wb(-2.0) == pytest.approx(0.15)
    assert tol_wb(2.0) == tol_wb(-2.0)


def test_flat_distances_exact_on_axes_and_diagonals():
    grid = GridSpec(2, 32)
    df = geodesic_distance(flat_metric(grid), np.zeros(2))
    assert df.snap_offset == 0.0
    assert df.dist[0, 0] == 0.0
    assert df.dist[4, 0] == pytest.approx(4 * grid.h, rel=1e-12)
    assert df.dist[5, 5] == pytest.approx(5 * np.sqrt(2) * grid.h, rel=1e-12)
    # periodic wraparound: going 3 steps backward is closer than 29 forward
    assert df.dist[-3, 0] == pytest.approx(3 * grid.h, rel=1e-12)


def test_distance_scales_with_constant_conformal_factor():
    grid = GridSpec(2, 32)
    flat = flat_metric(grid)
    scaled = MetricField(grid, 4.0 * flat.data)
    d1 = geodesic_distance(flat, np.zeros(2)).dist
    d2 = geodesic_distance(scaled, np.zeros(2)).dist
    assert np.allclose(d2, 2.0 * d1, rtol=1e-12)


def test_distance_triangle_inequality_on_graph():
    grid = GridSpec(2, 16)
    g = conformal_metric(grid, 0.1)
    da = geodesic_distance(g, np.zeros(2)).dist
    mid = np.array([4, 7]) * grid.h
    db = geodesic_distance(g, mid).dist
    # d(0, x) <= d(0, mid) + d(mid, x) for all x
    assert np.all(da <= da[4, 7] + db + 1e-12)


def test_source_snapping_records_offset():
    grid = GridSpec(2, 16)
    y = np.array([0.3 * grid.h, 0.0])
    df = geodesic_distance(flat_metric(grid), y)
    assert df.source_index == (0, 0)
    assert df.snap_offset == pytest.approx(0.3 * grid.h)


@pytest.fixture(scope="module")
def flat_traj():
    grid = GridSpec(2, 16)
    ts = tuple(sorted(0.1 / 2 ** i for i in range(10)))
    cfg = StepperConfig(
        T=0.1, snapshot_times=ts, series_stride=50, track_derivatives=False
    )
    g = flat_metric(grid)
    return integrate(g, g, cfg)


def test_ball_inf_requires_positive_C(flat_traj):
    with pytest.raises(ConfigurationError):
        ball_inf_scalar(flat_traj, np.zeros(2), -1.0, 0.4, 0.1)


def test_ball_inf_flat_is_zero(flat_traj):
    v = ball_inf_scalar(flat_traj, np.zeros(2), 1.0, 0.4, 0.05)
    assert abs(v) < 1e-12


def test_ball_inf_monotone_in_C(flat_traj):
    # larger balls can only lower the infimum (checked on any trajectory)
    cache = {}
    vals = [
        ball_inf_scalar(flat_traj, np.zeros(2), C, 0.4, 0.05, _cache=cache)
        for C in (0.5, 1.0, 2.0, 4.0)
    ]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


def test_weak_bound_preconditions(flat_traj):
    y = np.zeros(2)
    with pytest.raises(ConfigurationError):
        weak_lower_bound(flat_traj, y, beta=0.6)
    with pytest.raises(InsufficientDataError):
        weak_lower_bound(flat_traj, y, t_grid=(0.1, 0.05, 0.025))
    with pytest.raises(InsufficientDataError, match="two decades"):
        weak_lower_bound(
            flat_traj, y, t_grid=(0.1, 0.09, 0.08, 0.07, 0.06, 0.05)
        )
    with pytest.raises(InsufficientDataError):
        weak_lower_bound(flat_traj, y, C_grid=(1.0, 2.0))


def test_weak_bound_flat_passes_zero_fails_one(flat_traj):
    y = np.zeros(2)
    est0 = weak_lower_bound(flat_traj, y, kappa=0.0)
    assert est0.kappa_test["passed"]
    assert abs(est0.estimate) < 1e-12
    est1 = weak_lower_bound(flat_traj, y, kappa=1.0)
    assert not est1.kappa_test["passed"]


def test_weak_bound_report_and_table_shape(flat_traj):
    est = weak_lower_bound(flat_traj, np.zeros(2), kappa=0.0)
    assert est.ball_inf.shape == (len(est.C_grid), len(est.t_grid))
    text = est.report()
    assert "estimate" in text and "PASS" in text


def test_default_t_grid_is_decreasing_within_range():
    ts = [0.2, 0.1, 0.05, 0.01, 0.001, 0.0005, 0.0001, 5e-5]
    tg = default_t_grid(ts)
    assert tg[0] == 0.1 and tg[-1] == 0.0001
    assert all(a > b for a, b in zip(tg, tg[1:]))


def test_estimate_never_exceeds_pointwise_scalar():
    # the ball contains the evaluation point, so the estimate is a lower
    # bound for the scalar curvature seen there along the flow
    grid = GridSpec(2, 32)
    g0 = conformal_metric(grid, 0.02)
    ts = tuple(sorted(0.1 / 2 ** i for i in range(10)))
    cfg = StepperConfig(
        T=0.1, snapshot_times=ts, series_stride=50, track_derivatives=False
    )
    traj = integrate(g0, flat_metric(grid), cfg)
    tg = tuple(sorted((s.t for s in traj.states if s.t > 0), reverse=True))
    idx = (5, 9)
    est = weak_lower_bound(traj, np.array(idx) * grid.h, t_grid=tg)
    r_small_t = traj.state_at(tg[-1]).report.scalar[idx]
    assert est.estimate <= r_small_t + 1e-9

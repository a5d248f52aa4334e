"""Grid construction and finite-difference stencils."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torusflow.errors import ConfigurationError
from torusflow.grid import (
    GridSpec,
    gradient,
    laplacian_flat,
    partial1,
    partial2,
    partial2_diag,
)


def test_spec_basic_properties():
    g = GridSpec(2, 32)
    assert g.shape == (32, 32)
    assert g.npoints == 1024
    assert g.h == pytest.approx(2.0 * np.pi / 32)
    assert g.axis_coords()[0] == 0.0
    assert g.coords().shape == (32, 32, 2)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"dim": 4, "points_per_axis": 16},
        {"dim": 2, "points_per_axis": 6},
        {"dim": 2, "points_per_axis": 17},
        {"dim": 2, "points_per_axis": 16, "period": -1.0},
    ],
)
def test_spec_rejects_bad_parameters(kwargs):
    with pytest.raises(ConfigurationError):
        GridSpec(**kwargs)


def test_wrap_and_minimal_displacement():
    g = GridSpec(2, 16, period=1.0)
    assert g.wrap(np.array([1.25, -0.25])) == pytest.approx([0.25, 0.75])
    assert g.minimal_displacement(0.75) == pytest.approx(-0.25)
    assert g.minimal_displacement(-0.6) == pytest.approx(0.4)


@given(
    x=st.lists(st.floats(-3.0, 3.0), min_size=2, max_size=2),
    y=st.lists(st.floats(-3.0, 3.0), min_size=2, max_size=2),
)
@settings(max_examples=50, deadline=None)
def test_flat_distance_is_a_metric(x, y):
    g = GridSpec(2, 16, period=1.0)
    x, y = np.array(x), np.array(y)
    assert g.distance_flat(x, y) == pytest.approx(g.distance_flat(y, x))
    assert g.distance_flat(x, x) == 0.0
    # bounded by half the diagonal of the fundamental cell
    assert g.distance_flat(x, y) <= 0.5 * np.sqrt(2.0) * 1.0 + 1e-12


def _trig_field(grid, m=(2, 1)):
    x = grid.coords()
    phase = sum(mi * x[..., i] for i, mi in enumerate(m))
    return np.sin(phase), np.array(m, dtype=float)


def test_partial1_exact_order_of_accuracy():
    errs = []
    for N in (32, 64):
        grid = GridSpec(2, N)
        f, m = _trig_field(grid)
        x = grid.coords()
        phase = m[0] * x[..., 0] + m[1] * x[..., 1]
        exact = m[0] * np.cos(phase)
        errs.append(np.max(np.abs(partial1(f, 0, grid) - exact)))
    order = np.log2(errs[0] / errs[1])
    assert order > 3.8


def test_partial2_diag_order_of_accuracy():
    errs = []
    for N in (32, 64):
        grid = GridSpec(2, N)
        f, m = _trig_field(grid)
        x = grid.coords()
        phase = m[0] * x[..., 0] + m[1] * x[..., 1]
        exact = -m[0] ** 2 * np.sin(phase)
        errs.append(np.max(np.abs(partial2_diag(f, 0, grid) - exact)))
    assert np.log2(errs[0] / errs[1]) > 3.8


def test_mixed_partial_matches_analytic():
    grid = GridSpec(2, 64)
    f, m = _trig_field(grid)
    x = grid.coords()
    phase = m[0] * x[..., 0] + m[1] * x[..., 1]
    exact = -m[0] * m[1] * np.sin(phase)
    assert np.max(np.abs(partial2(f, 0, 1, grid) - exact)) < 5e-4


def test_mixed_partials_commute():
    grid = GridSpec(2, 32)
    rng = np.random.default_rng(0)
    # band-limited random field: commutation must hold to roundoff
    hat = np.zeros((32, 32), dtype=complex)
    hat[:4, :4] = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    f = np.fft.ifftn(hat).real
    a = partial2(f, 0, 1, grid)
    b = partial2(f, 1, 0, grid)
    assert np.max(np.abs(a - b)) < 1e-13


def test_gradient_stacks_before_components():
    grid = GridSpec(2, 16)
    f = np.zeros(grid.shape + (2, 2))
    f[..., 0, 1] = np.sin(grid.coords()[..., 0])
    g = gradient(f, grid)
    assert g.shape == grid.shape + (2, 2, 2)
    assert np.allclose(g[..., 0, 0, 1], np.cos(grid.coords()[..., 0]), atol=1e-2)


def test_laplacian_of_constant_is_zero():
    grid = GridSpec(3, 8)
    f = np.full(grid.shape, 3.7)
    assert np.max(np.abs(laplacian_flat(f, grid))) < 1e-12


def test_laplacian_matches_eigenvalue_on_plane_wave():
    grid = GridSpec(2, 64)
    f, m = _trig_field(grid, m=(3, 2))
    lam = -(m[0] ** 2 + m[1] ** 2)
    assert np.max(np.abs(laplacian_flat(f, grid) - lam * f)) < 2e-3

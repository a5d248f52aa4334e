"""Curvature operators against closed-form and structural oracles."""

import numpy as np
import pytest

from torusflow.fields import MetricField, TensorField, flat_metric
from torusflow.flow import _rdt_rhs
from torusflow.generators import (
    bilipschitz_pullback_metric,
    conformal_metric,
    conformal_scalar_oracle,
    random_smooth_metric,
)
from torusflow.geometry import (
    BackgroundGeometry,
    christoffel,
    curvature,
    deturck_field,
    lichnerowicz_L,
    lie_derivative,
    q_terms,
    ricci_tensor,
    scalar_curvature,
)
from torusflow.grid import GridSpec, laplacian_flat


def test_flat_metric_has_zero_curvature():
    grid = GridSpec(2, 16)
    rep = curvature(flat_metric(grid))
    assert np.max(np.abs(rep.christoffel.data)) < 1e-13
    assert np.max(np.abs(rep.riemann.data)) < 1e-13
    assert np.max(np.abs(rep.scalar)) < 1e-13


def test_scalar_curvature_against_conformal_oracle():
    grid = GridSpec(2, 64)
    amp = 0.1
    R = scalar_curvature(conformal_metric(grid, amp))
    Ro = conformal_scalar_oracle(grid, amp)
    assert np.max(np.abs(R - Ro)) / np.max(np.abs(Ro)) < 1e-4


def test_scalar_curvature_oracle_convergence_order():
    errs = []
    for N in (32, 64):
        grid = GridSpec(2, N)
        R = scalar_curvature(conformal_metric(grid, 0.1))
        errs.append(np.max(np.abs(R - conformal_scalar_oracle(grid, 0.1))))
    assert np.log2(errs[0] / errs[1]) > 3.5


def test_curvature_scaling_laws():
    # g -> lam g: Christoffel and Riemann (1,3) invariant, scalar -> scalar/lam
    grid = GridSpec(2, 32)
    g = conformal_metric(grid, 0.05)
    lam = 3.0
    g2 = MetricField(grid, lam * g.data)
    r1, r2 = curvature(g), curvature(g2)
    assert np.allclose(r1.christoffel.data, r2.christoffel.data, atol=1e-12)
    assert np.allclose(r1.riemann.data, r2.riemann.data, atol=1e-12)
    assert np.allclose(r1.scalar, lam * r2.scalar, atol=1e-10)


def test_ricci_tensor_matches_full_report():
    grid = GridSpec(2, 32)
    g = random_smooth_metric(grid, 0.1, 5)
    ric_fast = ricci_tensor(g).data
    ric_full = curvature(g).ricci.data
    assert np.max(np.abs(ric_fast - ric_full)) < 1e-10


def test_bilipschitz_pullback_is_discretely_ricci_flat():
    # piecewise-constant diagonal product metric: curvature vanishes exactly
    grid = GridSpec(2, 64)
    g = bilipschitz_pullback_metric(grid, 0.25)
    assert np.max(np.abs(ricci_tensor(g).data)) < 1e-12


def test_lie_derivative_of_flat_metric():
    # (L_X delta)_ij = d_i X_j + d_j X_i
    grid = GridSpec(2, 64)
    x = grid.coords()
    X = np.stack([np.sin(x[..., 1]), np.cos(x[..., 0])], axis=-1)
    out = lie_derivative(TensorField(grid, (0, 1), X), flat_metric(grid)).data
    exact = np.zeros_like(out)
    exact[..., 0, 1] = np.cos(x[..., 1]) - np.sin(x[..., 0])
    exact[..., 1, 0] = exact[..., 0, 1]
    assert np.max(np.abs(out - exact)) < 1e-4


def test_deturck_field_vanishes_in_conformal_gauge_2d():
    # 2d conformal metrics over flat are already in harmonic gauge
    grid = GridSpec(2, 32)
    g = conformal_metric(grid, 0.1)
    X = deturck_field(g, flat_metric(grid))
    assert np.max(np.abs(X.data)) < 1e-10


def test_deturck_field_zero_when_metric_equals_background():
    grid = GridSpec(3, 12)
    g = random_smooth_metric(grid, 0.05, 2)
    assert np.max(np.abs(deturck_field(g, g).data)) < 1e-11


def test_linear_operator_reduces_to_laplacian_on_flat_background():
    grid = GridSpec(2, 32)
    bg = flat_metric(grid)
    rng = np.random.default_rng(7)
    hat = np.zeros(grid.shape + (2, 2), dtype=complex)
    hat[:3, :3] = rng.standard_normal((3, 3, 2, 2))
    h = np.fft.ifftn(hat, axes=(0, 1)).real
    h = 0.5 * (h + np.swapaxes(h, -1, -2))
    L = lichnerowicz_L(TensorField(grid, (2, 0), h), bg).data
    assert np.max(np.abs(L - laplacian_flat(h, grid))) < 1e-10


def test_quadratic_terms_vanish_at_zero_perturbation():
    grid = GridSpec(2, 16)
    bg = flat_metric(grid)
    h = TensorField(grid, (2, 0), np.zeros(grid.shape + (2, 2)))
    q0, flux = q_terms(h, bg)
    assert np.max(np.abs(q0.data)) < 1e-14
    assert np.max(np.abs(flux.data)) < 1e-14


def test_rdt_rhs_linearization_is_the_linear_operator():
    # even part of rhs(bg + eps h) - eps L h scales like eps^2: the operator
    # L is the exact linearization (odd discretization-error terms cancel)
    grid = GridSpec(2, 32)
    bg = flat_metric(grid)
    geo = BackgroundGeometry(bg)
    h = random_smooth_metric(grid, 0.5, 9).data - bg.data
    hf = TensorField(grid, (2, 0), h)
    L = lichnerowicz_L(hf, bg, background=geo).data
    resid = []
    for eps in (2e-2, 1e-2):
        dp = _rdt_rhs(bg.data + eps * h, grid, geo) - eps * L
        dm = _rdt_rhs(bg.data - eps * h, grid, geo) + eps * L
        resid.append(np.max(np.abs(dp + dm)))
    order = np.log2(resid[0] / resid[1])
    assert 1.9 < order < 2.1


def test_christoffel_symmetric_in_lower_indices():
    grid = GridSpec(3, 12)
    gam = christoffel(random_smooth_metric(grid, 0.1, 11)).data
    assert np.max(np.abs(gam - np.swapaxes(gam, -1, -2))) < 1e-12

"""Field containers, closed-form eigenvalues, and the operator-norm gap."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torusflow.errors import ValidationError
from torusflow.fields import (
    MetricField,
    TensorField,
    flat_metric,
    operator_norm_gap,
    sym_eigenvalue_range,
    sym_inverse,
)
from torusflow.grid import GridSpec


def _random_sym(rng, n, count):
    a = rng.standard_normal((count, n, n))
    return 0.5 * (a + np.swapaxes(a, -1, -2))


@pytest.mark.parametrize("n", [2, 3])
def test_eigenvalue_range_matches_numpy(n):
    rng = np.random.default_rng(3)
    mats = _random_sym(rng, n, 200)
    emin, emax = sym_eigenvalue_range(mats)
    vals = np.linalg.eigvalsh(mats)
    assert np.allclose(emin, vals[..., 0], atol=1e-10)
    assert np.allclose(emax, vals[..., -1], atol=1e-10)


@pytest.mark.parametrize("n", [2, 3])
def test_sym_inverse_matches_numpy(n):
    rng = np.random.default_rng(4)
    mats = _random_sym(rng, n, 100) + 4.0 * np.eye(n)
    inv = sym_inverse(mats)
    assert np.allclose(inv @ mats, np.eye(n), atol=1e-10)


@given(
    a=st.floats(0.5, 4.0),
    b=st.floats(0.5, 4.0),
    c=st.floats(-0.4, 0.4),
)
@settings(max_examples=50, deadline=None)
def test_eigenvalue_range_brackets_trace_and_det(a, b, c):
    m = np.array([[a, c], [c, b]])
    emin, emax = sym_eigenvalue_range(m)
    assert emin <= emax
    assert emin + emax == pytest.approx(a + b, rel=1e-12)
    assert emin * emax == pytest.approx(a * b - c * c, abs=1e-10)


def test_tensor_field_shape_validation():
    grid = GridSpec(2, 16)
    with pytest.raises(ValidationError):
        TensorField(grid, (2, 0), np.zeros((16, 16, 2)))
    with pytest.raises(ValidationError):
        TensorField(grid, (2, 0), np.full((16, 16, 2, 2), np.nan))


def test_tensor_symmetry_detection():
    grid = GridSpec(2, 16)
    data = np.zeros(grid.shape + (2, 2))
    data[..., 0, 1] = 1.0
    t = TensorField(grid, (2, 0), data)
    assert not t.is_symmetric_2tensor()
    data[..., 1, 0] = 1.0
    assert TensorField(grid, (2, 0), data).is_symmetric_2tensor()


def test_metric_rejects_asymmetry_and_indefiniteness():
    grid = GridSpec(2, 16)
    bad = flat_metric(grid).data.copy()
    bad[..., 0, 1] = 0.5
    with pytest.raises(ValidationError):
        MetricField(grid, bad)
    neg = flat_metric(grid).data.copy()
    neg[0, 0] *= -1.0
    with pytest.raises(ValidationError, match="positive definite"):
        MetricField(grid, neg)


def test_metric_validation_records_eigenvalue_extrema():
    grid = GridSpec(2, 16)
    data = flat_metric(grid).data.copy()
    data[..., 0, 0] = 2.0
    m = MetricField(grid, data)
    assert m.min_eigenvalue == pytest.approx(1.0)
    assert m.max_eigenvalue == pytest.approx(2.0)


def test_flat_metric_inverse_is_identity():
    grid = GridSpec(3, 8)
    m = flat_metric(grid, scale=2.0)
    assert np.allclose(m.inverse(), 0.5 * np.eye(3))


def test_operator_norm_gap_flat_background_exact():
    grid = GridSpec(2, 16)
    bg = flat_metric(grid)
    data = bg.data.copy()
    data[..., 0, 0] += 0.25
    g = MetricField(grid, data)
    assert operator_norm_gap(g, bg) == pytest.approx(0.25)


def test_operator_norm_gap_general_background():
    grid = GridSpec(2, 16)
    bgd = flat_metric(grid).data.copy()
    bgd[..., 0, 0] = 4.0  # anisotropic background: general (eigh) path
    bg = MetricField(grid, bgd)
    gd = bgd.copy()
    gd[..., 0, 0] = 5.0
    g = MetricField(grid, gd)
    # bg^{-1/2} (g - bg) bg^{-1/2} = diag(1/4, 0)
    assert operator_norm_gap(g, bg) == pytest.approx(0.25)

"""Accelerated n = 3 kernels against the reference numpy implementations."""

import numpy as np
import pytest

from torusflow._fastpath import HAVE_NUMBA, eig_range3, rdt_rhs_flat3
from torusflow.fields import flat_metric, sym_eigenvalue_range
from torusflow.flow import _rdt_rhs
from torusflow.generators import random_smooth_metric
from torusflow.geometry import BackgroundGeometry
from torusflow.grid import GridSpec

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


@pytest.fixture(scope="module")
def g3():
    return random_smooth_metric(GridSpec(3, 12), 0.1, 0)


def test_rdt_rhs_matches_numpy_reference(g3):
    grid = g3.grid
    geo = BackgroundGeometry(flat_metric(grid))
    fast = rdt_rhs_flat3(g3.data, grid.h)
    ref = _rdt_rhs(g3.data, grid, geo, allow_fast=False)
    assert np.max(np.abs(fast - ref)) < 1e-12


def test_eig_range_matches_numpy_reference(g3):
    mn, mx, loc = eig_range3(g3.data)
    emin, emax = sym_eigenvalue_range(g3.data)
    assert mn == pytest.approx(float(np.min(emin)), abs=1e-12)
    assert mx == pytest.approx(float(np.max(emax)), abs=1e-12)
    assert int(loc) == int(np.argmin(emin))

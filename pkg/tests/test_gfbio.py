"""Snapshot format, series CSV, and provenance sidecars."""

import numpy as np
import pytest

from torusflow.errors import ValidationError
from torusflow.fields import MetricField, TensorField
from torusflow.flow import StepperConfig, integrate
from torusflow.generators import conformal_metric, random_smooth_metric
from torusflow.fields import flat_metric
from torusflow.gfbio import (
    SERIES_COLUMNS,
    read_gfb,
    read_metric,
    read_provenance,
    read_series_csv,
    read_tensor,
    write_gfb,
    write_provenance,
    write_series_csv,
)
from torusflow.grid import GridSpec


def test_metric_round_trip_bit_exact(tmp_path):
    grid = GridSpec(2, 16, period=2.0 * np.pi)
    g = random_smooth_metric(grid, 0.08, 7)
    p = tmp_path / "m.gfb"
    write_gfb(p, g)
    g2 = read_metric(p)
    assert g2.grid == grid
    assert np.array_equal(g.data, g2.data)  # bit-exact, not approx


def test_metric_round_trip_3d_and_odd_period(tmp_path):
    grid = GridSpec(3, 8, period=1.7)
    g = random_smooth_metric(grid, 0.05, 1)
    p = tmp_path / "m3.gfb"
    write_gfb(p, g)
    g2 = read_metric(p)
    assert g2.grid.period == grid.period  # repr round trip of the float
    assert np.array_equal(g.data, g2.data)


def test_symmetric_tensor_stored_triangularly(tmp_path):
    grid = GridSpec(2, 16)
    g = conformal_metric(grid, 0.05)
    p = tmp_path / "t.gfb"
    write_gfb(p, g)
    with open(p, "rb") as f:
        header = f.readline().decode().split()
        payload = f.read()
    assert header[4] == "2,0" and header[5] == "3"  # n(n+1)/2 components
    assert len(payload) == grid.npoints * 3 * 8


def test_general_tensor_round_trip(tmp_path):
    grid = GridSpec(2, 16)
    data = np.random.default_rng(0).standard_normal(grid.shape + (2,))
    t = TensorField(grid, (0, 1), data)
    p = tmp_path / "v.gfb"
    write_gfb(p, t)
    t2 = read_tensor(p)
    assert t2.valence == (0, 1)
    assert np.array_equal(t.data, t2.data)


def test_read_rejects_wrong_magic_and_truncation(tmp_path):
    p = tmp_path / "bad.gfb"
    p.write_bytes(b"NOPE 2 16 6.0 2,0 3\n")
    with pytest.raises(ValidationError):
        read_gfb(p)
    grid = GridSpec(2, 16)
    good = tmp_path / "trunc.gfb"
    write_gfb(good, flat_metric(grid))
    data = good.read_bytes()
    good.write_bytes(data[:-8])
    with pytest.raises(ValidationError, match="payload"):
        read_gfb(good)


def test_read_metric_rejects_non_metric_valence(tmp_path):
    grid = GridSpec(2, 16)
    t = TensorField(grid, (0, 1), np.zeros(grid.shape + (2,)))
    p = tmp_path / "v.gfb"
    write_gfb(p, t)
    with pytest.raises(ValidationError):
        read_metric(p)


def test_series_csv_round_trip(tmp_path):
    grid = GridSpec(2, 16)
    g0 = conformal_metric(grid, 0.03)
    cfg = StepperConfig(
        T=0.01, snapshot_times=(0.01,), series_stride=3, track_derivatives=True
    )
    traj = integrate(g0, flat_metric(grid), cfg)
    p = tmp_path / "series.csv"
    write_series_csv(p, traj)
    rows = read_series_csv(p)
    orig = traj.series_rows()
    assert len(rows) == len(orig)
    for got, want in zip(rows, orig):
        assert len(got) == len(SERIES_COLUMNS)
        for a, b in zip(got, want):
            if np.isnan(b):
                assert np.isnan(a)
            else:
                assert a == b  # repr formatting: exact floats


def test_provenance_round_trip(tmp_path):
    p = tmp_path / "prov.json"
    info = {"family": "flat", "amplitude": 0.1, "dim": 2}
    write_provenance(p, info)
    assert read_provenance(p) == info

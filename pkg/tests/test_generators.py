"""Initial-data families: contracts, roughness classes, and determinism."""

import numpy as np
import pytest

from torusflow.errors import ConfigurationError, ValidationError
from torusflow.fields import flat_metric
from torusflow.generators import (
    FAMILIES,
    GeneratorSpec,
    MetricPair,
    MollifiedSequence,
    bilipschitz_map,
    bilipschitz_pullback_metric,
    conformal_metric,
    generate,
    generate_metric,
    lipschitz_kink_metric,
    mollify_metric,
    provenance,
    random_smooth_metric,
    second_order_pair,
    tent_displacement,
)
from torusflow.geometry import scalar_curvature
from torusflow.grid import GridSpec, partial1
from torusflow.stats import fit_loglog
from torusflow.weakbound import geodesic_distance


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        GeneratorSpec(family="nonsense")
    with pytest.raises(ConfigurationError):
        GeneratorSpec(family="flat", eta=0.0)
    with pytest.raises(ConfigurationError):
        GeneratorSpec(family="flat", mollify_scales=(0.1, -0.1))


def test_generate_dispatch_covers_all_families():
    grid = GridSpec(2, 16)
    for family in FAMILIES:
        obj = generate(GeneratorSpec(family=family, amplitude=0.05), grid)
        m = generate_metric(GeneratorSpec(family=family, amplitude=0.05), grid)
        assert m.grid == grid
        if family == "second-order-pair":
            assert isinstance(obj, MetricPair)
        if family == "mollified-sequence":
            assert isinstance(obj, MollifiedSequence)


def test_amplitude_floor_guard():
    grid = GridSpec(2, 16)
    with pytest.raises(ValidationError, match="amplitude too large"):
        lipschitz_kink_metric(grid, -0.6)


def test_random_smooth_operator_gap_is_exact_and_seeded():
    grid = GridSpec(2, 32)
    from torusflow.fields import operator_norm_gap

    g = random_smooth_metric(grid, 0.07, 4)
    assert operator_norm_gap(g, flat_metric(grid)) == pytest.approx(0.07)
    g2 = random_smooth_metric(grid, 0.07, 4)
    assert np.array_equal(g.data, g2.data)
    g3 = random_smooth_metric(grid, 0.07, 5)
    assert not np.array_equal(g.data, g3.data)


def test_kink_is_continuous_but_not_c1():
    # first differences across the kink plane do not shrink under refinement
    slopes = []
    jumps = []
    for N in (32, 64):
        grid = GridSpec(2, N)
        g = lipschitz_kink_metric(grid, 0.2)
        f = g.data[..., 0, 0]
        jumps.append(np.max(np.abs(np.roll(f, -1, 0) - f)))  # ~ a*w*h: continuity
        df = partial1(f, 0, grid)
        # derivative jump across x1 = 0 stays O(1)
        slopes.append(abs(df[1, 0] - df[-1, 0]))
    assert jumps[1] < 0.75 * jumps[0]  # C0: difference shrinks ~h
    assert slopes[1] > 0.5 * slopes[0]  # not C1: derivative jump persists


def test_bilipschitz_map_is_monotone_and_periodic():
    grid = GridSpec(2, 64)
    x = np.linspace(0.0, grid.period, 257)
    y = bilipschitz_map(grid, 0.3, x)
    assert np.all(np.diff(y) > 0)
    assert tent_displacement(grid, 0.0) == pytest.approx(
        tent_displacement(grid, grid.period)
    )


def test_bilipschitz_pullback_is_isometric_to_flat_as_metric_space():
    # geodesic distance between mapped points equals the flat distance of
    # their images: the tent pullback changes coordinates, not geometry
    grid = GridSpec(2, 64)
    a = 0.25
    g = bilipschitz_pullback_metric(grid, a)
    # distance along the x1 axis between two points strictly inside one
    # linear piece of the tent must equal the flat distance of their images
    src = np.array([grid.h, 0.0])
    df = geodesic_distance(g, src)
    i = grid.points_per_axis // 2 - 1
    image_len = abs(
        bilipschitz_map(grid, a, grid.axis_coords()[i])
        - bilipschitz_map(grid, a, grid.h)
    )
    assert df.dist[i, 0] == pytest.approx(image_len, rel=1e-10)


def test_pair_gap_scaling_exponent():
    grid = GridSpec(2, 64)
    eta = 0.5
    pair = second_order_pair(grid, 1.0, eta)
    d = grid.distance_flat(grid.coords(), pair.center)
    gap = np.abs(pair.second.data - pair.first.data).max(axis=(-2, -1))
    # inside the flat bump core the gap is exactly c d^{2+eta}: fit the
    # scattered (d, gap) cloud directly
    sel = (d > 0.05) & (d < 0.35)
    slope, lo, hi, _ = fit_loglog(d[sel].ravel(), gap[sel].ravel())
    assert slope == pytest.approx(2.0 + eta, abs=0.05)


def test_pair_metrics_agree_at_center():
    grid = GridSpec(2, 64)
    pair = second_order_pair(grid, 1.0, 0.5)
    ci = tuple(int(round(c / grid.h)) for c in pair.center)
    assert np.allclose(pair.first.data[ci], pair.second.data[ci], atol=1e-12)


def test_mollification_preserves_mean_and_smooths():
    grid = GridSpec(2, 64)
    base = lipschitz_kink_metric(grid, 0.3)
    sm = mollify_metric(base, 0.2)
    assert np.mean(sm.data[..., 0, 0]) == pytest.approx(
        np.mean(base.data[..., 0, 0]), rel=1e-12
    )
    d_base = partial1(base.data[..., 0, 0], 0, grid)
    d_sm = partial1(sm.data[..., 0, 0], 0, grid)
    assert np.max(np.abs(d_sm)) < np.max(np.abs(d_base))


def test_mollified_sequence_converges_to_base():
    grid = GridSpec(2, 64)
    spec = GeneratorSpec(
        family="mollified-sequence", amplitude=-0.1,
        mollify_scales=(0.4, 0.2, 0.1, 0.05),
    )
    seq = generate(spec, grid)
    gaps = [
        float(np.max(np.abs(el.data - seq.base.data))) for el in seq.elements
    ]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    # measured curvature minima settle (Cauchy tail)
    assert abs(seq.kappas[-1] - seq.kappas[-2]) < abs(
        seq.kappas[1] - seq.kappas[0]
    ) + 1e-12


def test_conformal_metric_matches_its_oracle_sign():
    grid = GridSpec(2, 64)
    R = scalar_curvature(conformal_metric(grid, 0.05))
    assert np.min(R) < 0 < np.max(R)


def test_provenance_sidecar_contents():
    grid = GridSpec(2, 16)
    spec = GeneratorSpec(family="conformal", amplitude=0.05)
    m = generate_metric(spec, grid)
    info = provenance(spec, grid, m)
    assert info["family"] == "conformal"
    assert info["points_per_axis"] == 16
    assert "min_scalar" in info and np.isfinite(info["min_scalar"])

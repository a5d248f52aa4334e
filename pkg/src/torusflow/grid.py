"""Periodic grids on the flat n-torus and finite-difference stencils.

All fields live on a uniform N^n grid over [0, L)^n with periodic
wraparound.  Spatial derivatives are 4th-order central differences;
grid axes are the leading axes of every field array, component axes
trail.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: `dim` in {2, 3}, N points per axis, period L."""

    dim: int
    points_per_axis: int
    period: float = 2.0 * np.pi

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConfigurationError(f"dim must be 2 or 3, got {self.dim}")
        if self.points_per_axis < 8:
            raise ConfigurationError("need at least 8 points per axis")
        if self.points_per_axis % 2 != 0:
            raise ConfigurationError("points_per_axis must be even")
        if not self.period > 0:
            raise ConfigurationError("period must be positive")

    @property
    def n(self):
        return self.dim

    @property
    def shape(self):
        return (self.points_per_axis,) * self.dim

    @property
    def npoints(self):
        return self.points_per_axis ** self.dim

    @property
    def h(self):
        """Grid spacing L / N."""
        return self.period / self.points_per_axis

    def axis_coords(self):
        """1d coordinate array shared by every axis."""
        return np.arange(self.points_per_axis) * self.h

    def coords(self):
        """Meshgrid of coordinates, shape grid_shape + (dim,)."""
        axes = np.meshgrid(*([self.axis_coords()] * self.dim), indexing="ij")
        return np.stack(axes, axis=-1)

    def wrap(self, x):
        """Map points into the fundamental domain [0, L)."""
        return np.mod(x, self.period)

    def minimal_displacement(self, dx):
        """Shortest periodic representative of a displacement."""
        L = self.period
        return (np.asarray(dx) + 0.5 * L) % L - 0.5 * L

    def distance_flat(self, x, y):
        """Flat-torus distance between points (componentwise periodic)."""
        d = self.minimal_displacement(np.asarray(x) - np.asarray(y))
        return np.sqrt(np.sum(d * d, axis=-1))


def partial1(f, axis, grid):
    """4th-order central first derivative along a grid axis."""
    h = grid.h
    fp1 = np.roll(f, -1, axis)
    fm1 = np.roll(f, 1, axis)
    fp2 = np.roll(f, -2, axis)
    fm2 = np.roll(f, 2, axis)
    return (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h)


def partial2_diag(f, axis, grid):
    """4th-order central second derivative along one grid axis."""
    h = grid.h
    fp1 = np.roll(f, -1, axis)
    fm1 = np.roll(f, 1, axis)
    fp2 = np.roll(f, -2, axis)
    fm2 = np.roll(f, 2, axis)
    return (16.0 * (fp1 + fm1) - (fp2 + fm2) - 30.0 * f) / (12.0 * h * h)


def partial2(f, a, b, grid):
    """Mixed second partial; dedicated stencil on the diagonal."""
    if a == b:
        return partial2_diag(f, a, grid)
    return partial1(partial1(f, a, grid), b, grid)


def gradient(f, grid):
    """All first partials, stacked on a new trailing axis before components.

    Output shape: grid_shape + (dim,) + f.shape[dim:].
    """
    parts = [partial1(f, a, grid) for a in range(grid.dim)]
    return np.stack(parts, axis=grid.dim)


def laplacian_flat(f, grid):
    """Componentwise flat Laplacian (sum of diagonal second derivatives)."""
    out = partial2_diag(f, 0, grid)
    for a in range(1, grid.dim):
        out = out + partial2_diag(f, a, grid)
    return out

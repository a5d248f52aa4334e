"""GFB1 snapshot format, series CSV, and provenance sidecars.

GFB1 layout (bit-exact round trip):
  ASCII header line  ``GFB1 n N L valence count\n``
  followed by little-endian float64 components, row-major point order,
  component-major within a point.  Symmetric 2-tensors (valence ``2,0``
  with count n(n+1)/2) store the lower triangle only.
"""

import csv
import json

import numpy as np

from .errors import ValidationError
from .fields import MetricField, TensorField
from .grid import GridSpec

_MAGIC = "GFB1"


def _tri_indices(n):
    """Lower-triangle (i, j) pairs, row-major: (0,0), (1,0), (1,1), ..."""
    return [(i, j) for i in range(n) for j in range(i + 1)]


def write_gfb(path, field):
    """Write a MetricField or TensorField snapshot.

    Metrics and symmetric valence-(2,0) tensors are stored triangularly;
    other tensors store all n^rank components.
    """
    if isinstance(field, MetricField):
        valence, data = (2, 0), field.data
        symmetric = True
    elif isinstance(field, TensorField):
        valence, data = field.valence, field.data
        symmetric = valence == (2, 0) and field.is_symmetric_2tensor(tol=1e-12)
    else:
        raise ValidationError(f"cannot serialize {type(field).__name__}")
    grid = field.grid
    n = grid.dim
    rank = valence[0] + valence[1]
    if symmetric:
        tri = _tri_indices(n)
        count = len(tri)
        flat = np.empty(grid.shape + (count,))
        for c, (i, j) in enumerate(tri):
            flat[..., c] = data[..., i, j]
    else:
        count = n ** rank
        flat = data.reshape(grid.shape + (count,))
    header = (
        f"{_MAGIC} {n} {grid.points_per_axis} {grid.period!r} "
        f"{valence[0]},{valence[1]} {count}\n"
    )
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(np.ascontiguousarray(flat, dtype="<f8").tobytes())


def read_gfb(path):
    """Read a GFB1 snapshot; returns (grid, valence, data array).

    Data shape is grid + (n,)*rank, with symmetric storage expanded.
    """
    with open(path, "rb") as f:
        header = f.readline().decode("ascii").split()
        if len(header) != 6 or header[0] != _MAGIC:
            raise ValidationError(f"{path}: not a GFB1 file")
        n = int(header[1])
        N = int(header[2])
        L = float(header[3])
        valence = tuple(int(v) for v in header[4].split(","))
        count = int(header[5])
        raw = np.frombuffer(f.read(), dtype="<f8")
    grid = GridSpec(n, N, L)
    rank = sum(valence)
    expected = grid.npoints * count
    if raw.size != expected:
        raise ValidationError(
            f"{path}: payload has {raw.size} floats, expected {expected}"
        )
    flat = raw.reshape(grid.shape + (count,))
    tri = _tri_indices(n)
    if valence == (2, 0) and count == len(tri):
        data = np.empty(grid.shape + (n, n))
        for c, (i, j) in enumerate(tri):
            data[..., i, j] = flat[..., c]
            data[..., j, i] = flat[..., c]
    elif count == n ** rank:
        data = flat.reshape(grid.shape + (n,) * rank)
    else:
        raise ValidationError(f"{path}: component count {count} inconsistent")
    return grid, valence, data


def read_metric(path):
    grid, valence, data = read_gfb(path)
    if valence != (2, 0):
        raise ValidationError(f"{path}: valence {valence} is not a metric")
    return MetricField(grid, data)


def read_tensor(path):
    grid, valence, data = read_gfb(path)
    return TensorField(grid, valence, data, check=False)


SERIES_COLUMNS = ("t", "dt", "min_R", "max_R", "grad_h_inf", "hess_h_inf")


def write_series_csv(path, traj):
    """Write the monitoring series of a FlowTrajectory."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SERIES_COLUMNS)
        for row in traj.series_rows():
            w.writerow([repr(float(v)) for v in row])


def read_series_csv(path):
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        if tuple(header) != SERIES_COLUMNS:
            raise ValidationError(f"{path}: unexpected series columns {header}")
        return [tuple(float(v) for v in row) for row in r]


def write_provenance(path, info):
    """JSON sidecar recording how a data file was produced."""
    with open(path, "w") as f:
        json.dump(info, f, indent=2, sort_keys=True)
        f.write("\n")


def read_provenance(path):
    with open(path) as f:
        return json.load(f)

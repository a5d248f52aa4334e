"""Field containers: metrics and general tensor fields on a periodic grid."""

import numpy as np

from .errors import ConfigurationError, NonInvertibleMetricError, ValidationError
from .grid import GridSpec

# Metrics below this smallest eigenvalue are rejected rather than clamped;
# silent regularization would corrupt C0-closeness experiments.
EIGENVALUE_FLOOR = 1e-8

_SYMMETRY_TOL = 1e-12
_COND_LIMIT = 1e12


def sym_eigenvalue_range(mat):
    """(min, max) eigenvalue fields of a symmetric 2x2 or 3x3 matrix field.

    Closed-form: quadratic formula for n = 2, trigonometric solution of the
    characteristic cubic for n = 3.  Vectorized over leading axes.
    """
    n = mat.shape[-1]
    if n == 2:
        a = mat[..., 0, 0]
        b = mat[..., 1, 1]
        c = mat[..., 0, 1]
        tr2 = 0.5 * (a + b)
        disc = np.sqrt(np.maximum(0.25 * (a - b) ** 2 + c * c, 0.0))
        return tr2 - disc, tr2 + disc
    if n == 3:
        # Smith's trigonometric method for symmetric 3x3 eigenvalues.
        q = np.trace(mat, axis1=-2, axis2=-1) / 3.0
        d = mat - q[..., None, None] * np.eye(3)
        p2 = np.sum(d * d, axis=(-2, -1)) / 6.0
        p = np.sqrt(np.maximum(p2, 0.0))
        safe = np.where(p > 0, p, 1.0)
        dn = d / safe[..., None, None]
        a, b, c = dn[..., 0, 0], dn[..., 0, 1], dn[..., 0, 2]
        dd, e, f = dn[..., 1, 1], dn[..., 1, 2], dn[..., 2, 2]
        detd = (
            a * (dd * f - e * e) + b * (e * c - b * f) + c * (b * e - c * dd)
        )
        r = np.clip(np.where(p > 0, 0.5 * detd, 0.0), -1.0, 1.0)
        phi = np.arccos(r) / 3.0
        emax = q + 2.0 * p * np.cos(phi)
        emin = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
        return emin, emax
    raise ConfigurationError(f"unsupported matrix dimension {n}")


def sym_inverse(mat):
    """Closed-form inverse of a symmetric 2x2 or 3x3 matrix field."""
    n = mat.shape[-1]
    if n == 2:
        a = mat[..., 0, 0]
        b = mat[..., 0, 1]
        d = mat[..., 1, 1]
        det = a * d - b * b
        inv = np.empty_like(mat)
        inv[..., 0, 0] = d
        inv[..., 1, 1] = a
        inv[..., 0, 1] = -b
        inv[..., 1, 0] = -b
        return inv / det[..., None, None]
    if n == 3:
        a, b, c = mat[..., 0, 0], mat[..., 0, 1], mat[..., 0, 2]
        d, e, f = mat[..., 1, 1], mat[..., 1, 2], mat[..., 2, 2]
        A = d * f - e * e
        B = c * e - b * f
        C = b * e - c * d
        det = a * A + b * B + c * C
        inv = np.empty_like(mat)
        inv[..., 0, 0] = A
        inv[..., 0, 1] = inv[..., 1, 0] = B
        inv[..., 0, 2] = inv[..., 2, 0] = C
        inv[..., 1, 1] = a * f - c * c
        inv[..., 1, 2] = inv[..., 2, 1] = b * c - a * e
        inv[..., 2, 2] = a * d - b * b
        return inv / det[..., None, None]
    raise ConfigurationError(f"unsupported matrix dimension {n}")


class TensorField:
    """Tensor field of valence (p covariant, q contravariant) on a grid.

    Components live in the trailing p + q axes, each of length dim.
    """

    def __init__(self, grid, valence, data, check=True):
        data = np.asarray(data, dtype=np.float64)
        rank = valence[0] + valence[1]
        expected = grid.shape + (grid.dim,) * rank
        if data.shape != expected:
            raise ValidationError(
                f"tensor data shape {data.shape} != expected {expected}"
            )
        if check and not np.all(np.isfinite(data)):
            raise ValidationError("tensor field has non-finite entries")
        self.grid = grid
        self.valence = tuple(valence)
        self.data = data

    @property
    def rank(self):
        return self.valence[0] + self.valence[1]

    def max_norm(self):
        return float(np.max(np.abs(self.data)))

    def is_symmetric_2tensor(self, tol=_SYMMETRY_TOL):
        if self.rank != 2:
            return False
        d = self.data
        return bool(np.max(np.abs(d - np.swapaxes(d, -1, -2))) <= tol * max(1.0, np.max(np.abs(d))))


def require_symmetric(field, what="tensor"):
    if field.rank != 2 or not field.is_symmetric_2tensor(tol=1e-10):
        raise ValidationError(f"{what} must be a symmetric 2-tensor")


class MetricField:
    """Symmetric positive-definite 2-tensor field sampled on a periodic grid."""

    def __init__(self, grid, data, check=True):
        data = np.asarray(data, dtype=np.float64)
        expected = grid.shape + (grid.dim, grid.dim)
        if data.shape != expected:
            raise ValidationError(
                f"metric data shape {data.shape} != expected {expected}"
            )
        self.grid = grid
        self.data = data
        self.min_eigenvalue = None
        self.max_eigenvalue = None
        if check:
            self.validate()

    def validate(self):
        d = self.data
        if not np.all(np.isfinite(d)):
            raise ValidationError("metric has non-finite entries")
        asym = np.max(np.abs(d - np.swapaxes(d, -1, -2)))
        if asym > _SYMMETRY_TOL * max(1.0, float(np.max(np.abs(d)))):
            raise ValidationError(f"metric asymmetry {asym:g} exceeds tolerance")
        emin, emax = sym_eigenvalue_range(d)
        self.min_eigenvalue = float(np.min(emin))
        self.max_eigenvalue = float(np.max(emax))
        if self.min_eigenvalue < EIGENVALUE_FLOOR:
            idx = np.unravel_index(int(np.argmin(emin)), self.grid.shape)
            raise ValidationError(
                f"metric not positive definite at grid point {idx}: "
                f"min eigenvalue {self.min_eigenvalue:g} below floor {EIGENVALUE_FLOOR:g}"
            )
        return self

    def inverse(self):
        """Pointwise inverse metric, shape grid + (n, n)."""
        emin, emax = sym_eigenvalue_range(self.data)
        cond = np.max(emax) / max(np.min(emin), 1e-300)
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise NonInvertibleMetricError(
                f"metric condition number {cond:g} above 1e12"
            )
        return sym_inverse(self.data)

    def as_tensor(self):
        return TensorField(self.grid, (2, 0), self.data, check=False)

    def copy(self):
        m = MetricField(self.grid, self.data.copy(), check=False)
        m.min_eigenvalue = self.min_eigenvalue
        m.max_eigenvalue = self.max_eigenvalue
        return m


def same_grid(*objs):
    g0 = objs[0].grid
    for o in objs[1:]:
        if o.grid != g0:
            raise ConfigurationError("fields live on different grids")
    return g0


def flat_metric(grid, scale=1.0):
    """Constant multiple of the identity metric."""
    data = np.zeros(grid.shape + (grid.dim, grid.dim))
    for i in range(grid.dim):
        data[..., i, i] = scale
    return MetricField(grid, data)


def operator_norm_gap(g, bg):
    """sup over points of the bg-operator norm of g - bg.

    For constant conformal bg this is exact; in general it uses the
    symmetric similarity transform bg^{-1/2} (g - bg) bg^{-1/2}.
    """
    same_grid(g, bg)
    diff = g.data - bg.data
    bgd = bg.data
    # Fast path: bg proportional to the identity at every point.
    n = bg.grid.dim
    offdiag = bgd - np.eye(n) * bgd[..., :1, :1]
    if np.max(np.abs(offdiag)) < 1e-14:
        emin, emax = sym_eigenvalue_range(diff)
        scale = bgd[..., 0, 0]
        return float(np.max(np.maximum(np.abs(emin), np.abs(emax)) / scale))
    vals, vecs = np.linalg.eigh(bgd)
    isq = vecs @ (vals[..., None] ** -0.5 * np.swapaxes(vecs, -1, -2))
    m = isq @ diff @ isq
    emin, emax = sym_eigenvalue_range(m)
    return float(np.max(np.maximum(np.abs(emin), np.abs(emax))))

"""Initial-data generators: every metric family the experiments consume.

Families
  flat                  identity metric
  conformal             g = e^{2 phi} delta with a fixed two-mode phi
                        (analytic curvature oracle in dimension 2)
  random-smooth         band-limited seeded perturbation of flat
  lipschitz-kink        g = (1 + a |sin(2 pi x1 / L)|) delta  (C0, not C1)
  bilipschitz-pullback  flat pulled back by per-axis tent maps
                        (piecewise-constant diagonal metric, isometric to
                        flat as a metric space)
  second-order-pair     (g', g'' = g' + c rho(d) d^{2+eta} S): two metrics
                        agreeing to greater than second order at a center
  mollified-sequence    periodic Gaussian mollifications of a kink metric,
                        with the min scalar curvature of each element
                        measured and reported

Non-smooth sets are grid-aligned so refinement studies see a consistent
singular locus; roughness enters only through the explicit kink and tent
constructions, never through unresolved random modes.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ValidationError
from .fields import MetricField, flat_metric, sym_eigenvalue_range
from .grid import GridSpec

FAMILIES = (
    "flat",
    "conformal",
    "random-smooth",
    "lipschitz-kink",
    "bilipschitz-pullback",
    "second-order-pair",
    "mollified-sequence",
)

# Generated metrics must stay uniformly non-degenerate.
MIN_EIGENVALUE = 0.5


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    amplitude: float = 0.1
    seed: int = 0
    eta: float = 0.5
    mollify_scales: tuple = (0.4, 0.2, 0.1, 0.05)
    kappa_target: float = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown generator family {self.family!r}")
        if not 0.0 < self.eta <= 2.0:
            raise ConfigurationError("eta must be in (0, 2]")
        if any(s <= 0 for s in self.mollify_scales):
            raise ConfigurationError("mollify_scales must be positive")


@dataclass
class MetricPair:
    """Two metrics agreeing to greater than second order at `center`."""

    first: MetricField
    second: MetricField
    center: np.ndarray
    eta: float


@dataclass
class MollifiedSequence:
    """Smooth approximants of a C0 base metric at decreasing scales.

    `kappas[i]` is the measured min scalar curvature of `elements[i]`.
    """

    base: MetricField
    scales: tuple
    elements: list = field(default_factory=list)
    kappas: list = field(default_factory=list)


def _require_floor(m: MetricField, family):
    if m.min_eigenvalue < MIN_EIGENVALUE:
        raise ValidationError(
            f"{family}: amplitude too large, min eigenvalue "
            f"{m.min_eigenvalue:g} below {MIN_EIGENVALUE:g}"
        )
    return m


# --- conformal family (with analytic oracle) ---------------------------------

def _conformal_modes(grid):
    if grid.dim == 2:
        return (np.array([1.0, 1.0]), np.array([2.0, -1.0]))
    return (np.array([1.0, 1.0, 0.0]), np.array([0.0, 2.0, -1.0]))


def conformal_phi(grid: GridSpec, amplitude):
    """phi = a (cos(m1.wx) + 0.5 sin(m2.wx)), w = 2 pi / L."""
    w = 2.0 * np.pi / grid.period
    x = grid.coords()
    m1, m2 = _conformal_modes(grid)
    p1 = w * np.einsum("...a,a->...", x, m1)
    p2 = w * np.einsum("...a,a->...", x, m2)
    return amplitude * (np.cos(p1) + 0.5 * np.sin(p2))


def conformal_laplacian_phi(grid: GridSpec, amplitude):
    """Analytic flat Laplacian of conformal_phi."""
    w = 2.0 * np.pi / grid.period
    x = grid.coords()
    m1, m2 = _conformal_modes(grid)
    p1 = w * np.einsum("...a,a->...", x, m1)
    p2 = w * np.einsum("...a,a->...", x, m2)
    return -amplitude * w * w * (
        np.dot(m1, m1) * np.cos(p1) + 0.5 * np.dot(m2, m2) * np.sin(p2)
    )


def conformal_metric(grid: GridSpec, amplitude):
    phi = conformal_phi(grid, amplitude)
    data = np.zeros(grid.shape + (grid.dim, grid.dim))
    e2p = np.exp(2.0 * phi)
    for i in range(grid.dim):
        data[..., i, i] = e2p
    return MetricField(grid, data)


def conformal_scalar_oracle(grid: GridSpec, amplitude):
    """Closed-form scalar curvature of the conformal family, dimension 2:
    R = -2 e^{-2 phi} Lap(phi)."""
    if grid.dim != 2:
        raise ConfigurationError("conformal scalar oracle is 2d only")
    phi = conformal_phi(grid, amplitude)
    return -2.0 * np.exp(-2.0 * phi) * conformal_laplacian_phi(grid, amplitude)


# --- random smooth perturbations ---------------------------------------------

_MAX_MODE = 4


def random_smooth_metric(grid: GridSpec, amplitude, seed):
    """Band-limited random symmetric perturbation of flat.

    Modes are bounded by 4 per axis; the perturbation is scaled so that
    its largest pointwise eigenvalue magnitude (the operator-norm gap to
    flat) equals `amplitude` exactly.
    """
    rng = np.random.default_rng(seed)
    n = grid.dim
    w = 2.0 * np.pi / grid.period
    x = grid.coords()
    h = np.zeros(grid.shape + (n, n))
    for i in range(n):
        for j in range(i, n):
            f = np.zeros(grid.shape)
            for _ in range(6):
                m = rng.integers(-_MAX_MODE, _MAX_MODE + 1, size=n)
                if not np.any(m):
                    continue
                coef = rng.standard_normal() / (1.0 + float(m @ m))
                phase = rng.uniform(0.0, 2.0 * np.pi)
                f += coef * np.cos(w * np.einsum("...a,a->...", x, m) + phase)
            h[..., i, j] = f
            h[..., j, i] = f
    emin, emax = sym_eigenvalue_range(h)
    norm = max(float(np.max(np.abs(emin))), float(np.max(np.abs(emax))))
    if norm > 0:
        h *= amplitude / norm
    m = MetricField(grid, flat_metric(grid).data + h)
    return _require_floor(m, "random-smooth")


# --- Lipschitz kink ----------------------------------------------------------

def lipschitz_kink_metric(grid: GridSpec, amplitude):
    """g = (1 + a |sin(2 pi x1 / L)|) delta: continuous, not C1 on the
    grid-aligned planes x1 in {0, L/2}.  Negative a dents the metric
    instead of bulging it."""
    w = 2.0 * np.pi / grid.period
    x1 = grid.coords()[..., 0]
    fac = 1.0 + amplitude * np.abs(np.sin(w * x1))
    data = np.zeros(grid.shape + (grid.dim, grid.dim))
    for i in range(grid.dim):
        data[..., i, i] = fac
    return _require_floor(MetricField(grid, data), "lipschitz-kink")


# --- bi-Lipschitz pullback of flat -------------------------------------------

def tent_displacement(grid: GridSpec, x):
    """Periodic tent psi(x) = |x - L/2| - L/4, slope -1 then +1, kinks at
    the grid-aligned points {0, L/2}."""
    L = grid.period
    xm = np.mod(np.asarray(x, dtype=float), L)
    return np.abs(xm - 0.5 * L) - 0.25 * L


def tent_slope(grid: GridSpec, x):
    """Derivative of the tent, with midpoint value 0 at the kinks."""
    L = grid.period
    xm = np.mod(np.asarray(x, dtype=float), L)
    return np.sign(xm - 0.5 * L) * (xm != 0.0)


def bilipschitz_map(grid: GridSpec, amplitude, x):
    """The per-axis homeomorphism Phi_i(x) = x_i + a psi(x_i)."""
    return np.asarray(x, dtype=float) + amplitude * tent_displacement(grid, x)


def bilipschitz_pullback_metric(grid: GridSpec, amplitude):
    """Flat metric pulled back by `bilipschitz_map`: diagonal with entries
    (1 + a psi'(x_i))^2, piecewise constant, jumps on grid-aligned planes."""
    if not abs(amplitude) < 0.5:
        raise ValidationError(
            "bilipschitz-pullback needs |amplitude| < 0.5 for invertibility"
        )
    x = grid.coords()
    data = np.zeros(grid.shape + (grid.dim, grid.dim))
    for i in range(grid.dim):
        slope = tent_slope(grid, x[..., i])
        data[..., i, i] = (1.0 + amplitude * slope) ** 2
    return _require_floor(MetricField(grid, data), "bilipschitz-pullback")


# --- second-order agreement pairs --------------------------------------------

_BASE_CONFORMAL_AMPLITUDE = 0.02


def _bump(s):
    """Smooth cutoff: identically 1 for s <= 1/2, 0 for s >= 1.

    The flat core keeps the pair gap exactly proportional to d^{2+eta}
    near the center, so measured scaling slopes are clean.
    """
    out = np.zeros_like(s)
    out[s <= 0.5] = 1.0
    ramp = (s > 0.5) & (s < 1.0)
    u = (s[ramp] - 0.5) / 0.5
    out[ramp] = np.exp(1.0 - 1.0 / (1.0 - u * u))
    return out


def second_order_pair(grid: GridSpec, amplitude, eta):
    """(g', g'') differing by c rho(d) d^{2+eta} S around the center point,
    with rho a smooth bump cut off at radius L/8 and S a fixed unit
    symmetric direction."""
    gprime = conformal_metric(grid, _BASE_CONFORMAL_AMPLITUDE)
    n = grid.dim
    center = np.full(n, 0.5 * grid.period)
    d = grid.distance_flat(grid.coords(), center)
    r0 = grid.period / 8.0
    profile = amplitude * _bump(d / r0) * d ** (2.0 + eta)
    S = np.zeros((n, n))
    S[0, 0] = 1.0 / np.sqrt(2.0)
    S[1, 1] = -1.0 / np.sqrt(2.0)
    data = gprime.data + profile[..., None, None] * S
    gsecond = _require_floor(MetricField(grid, data), "second-order-pair")
    return MetricPair(first=gprime, second=gsecond, center=center, eta=eta)


# --- mollification -----------------------------------------------------------

def mollify_metric(g: MetricField, scale):
    """Periodic Gaussian convolution at width `scale` (componentwise FFT
    multiplier e^{-|k|^2 scale^2 / 2})."""
    grid = g.grid
    k1 = 2.0 * np.pi * np.fft.fftfreq(grid.points_per_axis, d=grid.h)
    ks = np.meshgrid(*([k1] * grid.dim), indexing="ij")
    k2 = sum(k * k for k in ks)
    mult = np.exp(-0.5 * k2 * scale * scale)
    axes = tuple(range(grid.dim))
    sm = np.fft.ifftn(
        np.fft.fftn(g.data, axes=axes) * mult[(...,) + (None, None)], axes=axes
    ).real
    sm = 0.5 * (sm + np.swapaxes(sm, -1, -2))
    return MetricField(grid, sm)


def mollified_sequence(grid: GridSpec, spec: GeneratorSpec):
    """Mollify the kink base at spec.mollify_scales (decreasing order) and
    measure each element's min scalar curvature."""
    from .geometry import scalar_curvature

    base = lipschitz_kink_metric(grid, spec.amplitude)
    seq = MollifiedSequence(base=base, scales=tuple(spec.mollify_scales))
    for scale in seq.scales:
        el = mollify_metric(base, scale)
        seq.elements.append(el)
        seq.kappas.append(float(np.min(scalar_curvature(el))))
    return seq


# --- dispatch ----------------------------------------------------------------

def generate(spec: GeneratorSpec, grid: GridSpec):
    """Produce the family's object: a MetricField, a MetricPair, or a
    MollifiedSequence.  Deterministic given (spec, grid)."""
    if spec.family == "flat":
        return flat_metric(grid)
    if spec.family == "conformal":
        return conformal_metric(grid, spec.amplitude)
    if spec.family == "random-smooth":
        return random_smooth_metric(grid, spec.amplitude, spec.seed)
    if spec.family == "lipschitz-kink":
        return lipschitz_kink_metric(grid, spec.amplitude)
    if spec.family == "bilipschitz-pullback":
        return bilipschitz_pullback_metric(grid, spec.amplitude)
    if spec.family == "second-order-pair":
        return second_order_pair(grid, spec.amplitude, spec.eta)
    if spec.family == "mollified-sequence":
        return mollified_sequence(grid, spec)
    raise ConfigurationError(f"unknown generator family {spec.family!r}")


def generate_metric(spec: GeneratorSpec, grid: GridSpec) -> MetricField:
    """Single-metric view of `generate`: the first element of a pair, the
    C0 base of a mollified sequence, else the metric itself."""
    obj = generate(spec, grid)
    if isinstance(obj, MetricPair):
        return obj.first
    if isinstance(obj, MollifiedSequence):
        return obj.base
    return obj


def provenance(spec: GeneratorSpec, grid: GridSpec, metric: MetricField):
    """Sidecar dictionary recording family, parameters, and measured data."""
    info = {
        "family": spec.family,
        "amplitude": spec.amplitude,
        "seed": spec.seed,
        "eta": spec.eta,
        "mollify_scales": list(spec.mollify_scales),
        "dim": grid.dim,
        "points_per_axis": grid.points_per_axis,
        "period": grid.period,
        "min_eigenvalue": metric.min_eigenvalue,
        "max_eigenvalue": metric.max_eigenvalue,
    }
    if spec.family in ("flat", "conformal", "random-smooth"):
        from .geometry import scalar_curvature

        info["min_scalar"] = float(np.min(scalar_curvature(metric)))
    return info

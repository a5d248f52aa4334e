"""Discrete tensor calculus on flat-torus grids.

Index conventions (trailing component axes):
  christoffel  G[..., k, i, j]    = Gamma^k_ij
  riemann      Rm[..., m, p, i, j] = R^m_pij
                 = d_i Gamma^m_jp - d_j Gamma^m_ip
                   + Gamma^m_iq Gamma^q_jp - Gamma^m_jq Gamma^q_ip
  ricci        Ric[..., p, j]     = R^i_pij  (symmetrized)
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePerturbationError, ValidationError
from .fields import (
    MetricField,
    TensorField,
    require_symmetric,
    same_grid,
    sym_eigenvalue_range,
    sym_inverse,
)
from .grid import partial1, partial2


@dataclass
class CurvatureReport:
    """Curvature package for one metric: connection, Rm, Ric, scalar, extrema."""

    christoffel: TensorField
    riemann: TensorField
    ricci: TensorField
    scalar: np.ndarray
    min_scalar: float
    max_scalar: float


def _metric_partials(gdata, grid):
    """D[..., a, i, j] = d_a g_ij."""
    return np.stack([partial1(gdata, a, grid) for a in range(grid.dim)], axis=grid.dim)


def _christoffel_raw(gdata, ginv, grid):
    D = _metric_partials(gdata, grid)
    # T[..., l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    T = np.einsum("...ijl->...lij", D) + np.einsum("...jil->...lij", D) - D
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, T), D


def christoffel(g: MetricField) -> TensorField:
    """Levi-Civita coefficients Gamma^k_ij of g, 4th-order stencils."""
    ginv = g.inverse()
    gam, _ = _christoffel_raw(g.data, ginv, g.grid)
    return TensorField(g.grid, (2, 1), gam, check=False)


def _ricci_raw(gam, grid):
    """Ricci tensor from Christoffel symbols (fast contracted path)."""
    n = grid.dim
    # A_jk = d_i Gamma^i_jk
    A = partial1(gam[..., 0, :, :], 0, grid)
    for i in range(1, n):
        A = A + partial1(gam[..., i, :, :], i, grid)
    # trace tau_k = Gamma^i_ik ; B_jk = d_j tau_k
    tau = np.einsum("...iik->...k", gam)
    B = np.stack([partial1(tau, j, grid) for j in range(n)], axis=-2)
    C = np.einsum("...p,...pjk->...jk", tau, gam)
    E = np.einsum("...ijp,...pik->...jk", gam, gam)
    ric = A - B + C - E
    return 0.5 * (ric + np.swapaxes(ric, -1, -2))


def _riemann_raw(gam, grid):
    n = grid.dim
    dgam = np.stack([partial1(gam, a, grid) for a in range(n)], axis=grid.dim)
    # dgam[..., a, m, i, j] = d_a Gamma^m_ij
    rm = (
        np.einsum("...imjp->...mpij", dgam)
        - np.einsum("...jmip->...mpij", dgam)
        + np.einsum("...miq,...qjp->...mpij", gam, gam)
        - np.einsum("...mjq,...qip->...mpij", gam, gam)
    )
    return rm


def curvature(g: MetricField) -> CurvatureReport:
    """Full curvature report: Gamma, Riemann, Ricci, scalar and its extrema."""
    grid = g.grid
    ginv = g.inverse()
    gam, _ = _christoffel_raw(g.data, ginv, grid)
    rm = _riemann_raw(gam, grid)
    ric = np.einsum("...ipij->...pj", rm)
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    scalar = np.einsum("...ij,...ij->...", ginv, ric)
    return CurvatureReport(
        christoffel=TensorField(grid, (2, 1), gam, check=False),
        riemann=TensorField(grid, (3, 1), rm, check=False),
        ricci=TensorField(grid, (2, 0), ric, check=False),
        scalar=scalar,
        min_scalar=float(np.min(scalar)),
        max_scalar=float(np.max(scalar)),
    )


def ricci_tensor(g: MetricField) -> TensorField:
    """Ricci tensor only (cheaper than a full report; used by the steppers)."""
    ginv = g.inverse()
    gam, _ = _christoffel_raw(g.data, ginv, g.grid)
    return TensorField(g.grid, (2, 0), _ricci_raw(gam, g.grid), check=False)


def scalar_curvature(g: MetricField) -> np.ndarray:
    ginv = g.inverse()
    gam, _ = _christoffel_raw(g.data, ginv, g.grid)
    return np.einsum("...ij,...ij->...", ginv, _ricci_raw(gam, g.grid))


def deturck_field(g: MetricField, bg: MetricField) -> TensorField:
    """X^k = g^{ij} (Gamma^k_ij(bg) - Gamma^k_ij(g))."""
    grid = same_grid(g, bg)
    ginv = g.inverse()
    gam_g, _ = _christoffel_raw(g.data, ginv, grid)
    gam_bg, _ = _christoffel_raw(bg.data, bg.inverse(), grid)
    x = np.einsum("...ij,...kij->...k", ginv, gam_bg - gam_g)
    return TensorField(grid, (0, 1), x, check=False)


def lie_derivative(X: TensorField, g: MetricField) -> TensorField:
    """(L_X g)_ij = X^k d_k g_ij + g_kj d_i X^k + g_ik d_j X^k."""
    grid = same_grid(X, g)
    if X.valence != (0, 1):
        raise ValidationError("X must be a vector field (valence (0,1))")
    n = grid.dim
    dg = _metric_partials(g.data, grid)
    dX = np.stack([partial1(X.data, a, grid) for a in range(n)], axis=grid.dim)
    # dX[..., a, k] = d_a X^k
    out = (
        np.einsum("...k,...kij->...ij", X.data, dg)
        + np.einsum("...kj,...ik->...ij", g.data, dX)
        + np.einsum("...ik,...jk->...ij", g.data, dX)
    )
    return TensorField(grid, (2, 0), out, check=False)


def _cov_deriv_2tensor(hdata, gam, grid):
    """T[..., a, i, j] = nabla_a h_ij w.r.t. the connection gam."""
    n = grid.dim
    dh = np.stack([partial1(hdata, a, grid) for a in range(n)], axis=grid.dim)
    if gam is None:
        return dh
    return (
        dh
        - np.einsum("...sai,...sj->...aij", gam, hdata)
        - np.einsum("...saj,...is->...aij", gam, hdata)
    )


def _is_constant(data):
    flat = data.reshape(-1, *data.shape[-2:])
    return bool(np.max(np.abs(flat - flat[0])) < 1e-14)


class BackgroundGeometry:
    """Cached connection/curvature data for a background metric."""

    def __init__(self, bg: MetricField):
        self.bg = bg
        self.grid = bg.grid
        self.flat = _is_constant(bg.data)
        if self.flat:
            one = np.linalg.inv(bg.data.reshape(-1, bg.grid.dim, bg.grid.dim)[0])
            self.inv = np.broadcast_to(one, bg.data.shape)
        else:
            self.inv = bg.inverse()
        if self.flat:
            self.gam = None
            self.rm = None
        else:
            self.gam, _ = _christoffel_raw(bg.data, self.inv, bg.grid)
            self.rm = _riemann_raw(self.gam, bg.grid)

    def cov_deriv(self, hdata):
        return _cov_deriv_2tensor(hdata, self.gam, self.grid)

    def curvature_action(self, hdata):
        """2 bg^{pq} R^m_pij h_qm, the curvature term of the linear operator."""
        if self.flat:
            return np.zeros_like(hdata)
        return 2.0 * np.einsum("...pq,...mpij,...qm->...ij", self.inv, self.rm, hdata)

    def laplacian_2tensor(self, hdata):
        """Connection Laplacian bg^{ab} nabla_a nabla_b h_ij."""
        grid = self.grid
        n = grid.dim
        if self.flat:
            # inv is constant; contract with dedicated 2nd-derivative stencils
            out = np.zeros_like(hdata)
            inv0 = self.inv.reshape(-1, n, n)[0]
            for a in range(n):
                for b in range(n):
                    c = inv0[a, b]
                    if c != 0.0:
                        out += c * partial2(hdata, a, b, grid)
            return out
        T = self.cov_deriv(hdata)  # T[..., b, i, j]
        gam = self.gam
        d2 = np.stack(
            [
                np.stack([partial2(hdata, a, b, grid) for b in range(n)], axis=grid.dim)
                for a in range(n)
            ],
            axis=grid.dim,
        )  # d2[..., a, b, i, j]
        dgam = np.stack([partial1(gam, a, grid) for a in range(n)], axis=grid.dim)
        dh = np.stack([partial1(hdata, a, grid) for a in range(n)], axis=grid.dim)
        U = (
            d2
            - np.einsum("...asbi,...sj->...abij", dgam, hdata)
            - np.einsum("...asbj,...is->...abij", dgam, hdata)
            - np.einsum("...sbi,...asj->...abij", gam, dh)
            - np.einsum("...sbj,...ais->...abij", gam, dh)
            - np.einsum("...sab,...sij->...abij", gam, T)
            - np.einsum("...sai,...bsj->...abij", gam, T)
            - np.einsum("...saj,...bis->...abij", gam, T)
        )
        return np.einsum("...ab,...abij->...ij", self.inv, U)

    def divergence_flux(self, flux):
        """nabla_p F^p_ij for a flux F[..., p, i, j]."""
        grid = self.grid
        n = grid.dim
        out = partial1(flux[..., 0, :, :], 0, grid)
        for p in range(1, n):
            out = out + partial1(flux[..., p, :, :], p, grid)
        if not self.flat:
            gam = self.gam
            out = (
                out
                + np.einsum("...ppq,...qij->...ij", gam, flux)
                - np.einsum("...qpi,...pqj->...ij", gam, flux)
                - np.einsum("...qpj,...piq->...ij", gam, flux)
            )
        return out


def lichnerowicz_L(h: TensorField, bg: MetricField, background=None) -> TensorField:
    """Linear operator of the perturbation equation:

        L h = Delta^{bg} h + 2 bg^{pq} R^m_pij h_qm .

    Heat-type (parabolic) sign: the perturbation flow advances d_t h = L h + Q.
    """
    grid = same_grid(h, bg)
    require_symmetric(h, "h")
    geo = background if background is not None else BackgroundGeometry(bg)
    out = geo.laplacian_2tensor(h.data) + geo.curvature_action(h.data)
    return TensorField(grid, (2, 0), out, check=False)


def q_terms(h: TensorField, bg: MetricField, background=None):
    """Quadratic terms of the perturbation equation.

    Returns (Q0, Q1_flux) with Q1_flux[..., p, i, j] =
    ((bg+h)^{pq} - bg^{pq}) nabla_q h_ij, so that the divergence-form
    source is nabla_p Q1_flux^p_ij.
    """
    grid = same_grid(h, bg)
    require_symmetric(h, "h")
    geo = background if background is not None else BackgroundGeometry(bg)
    ghat = bg.data + h.data
    emin, _ = sym_eigenvalue_range(ghat)
    if np.min(emin) <= 0.0:
        idx = np.unravel_index(int(np.argmin(emin)), grid.shape)
        raise DegeneratePerturbationError(
            f"bg + h not positive definite at grid point {idx}"
        )
    W = sym_inverse(ghat)
    T = geo.cov_deriv(h.data)  # T[..., a, i, j] = nabla_a h_ij
    # Gradient-quadratic part of the Ricci-DeTurck right side,
    #   (1/2) g^{ab} g^{pq} ( nab_i h_pa nab_j h_qb
    #                         + 2 nab_a h_jp nab_q h_ib
    #                         - 2 nab_a h_jp nab_b h_iq
    #                         - 2 nab_j h_pa nab_b h_iq
    #                         - 2 nab_i h_pa nab_b h_jq ),
    # plus g^{pa} g^{bq} nab_p h_ab nab_q h_ij, which compensates the
    # nab_p(g^{pq}) nab_q h_ij produced when the principal term
    # g^{ab} nab_a nab_b h is rewritten through the divergence-form flux.
    q0 = (
        0.5 * np.einsum("...ab,...pq,...ipa,...jqb->...ij", W, W, T, T)
        + np.einsum("...ab,...pq,...ajp,...qib->...ij", W, W, T, T)
        - np.einsum("...ab,...pq,...ajp,...biq->...ij", W, W, T, T)
        - np.einsum("...ab,...pq,...jpa,...biq->...ij", W, W, T, T)
        - np.einsum("...ab,...pq,...ipa,...bjq->...ij", W, W, T, T)
        + np.einsum("...pa,...bq,...pab,...qij->...ij", W, W, T, T)
    )
    if not geo.flat:
        dinv = W - geo.inv
        q0 = q0 + np.einsum(
            "...pq,...mpij,...qm->...ij", dinv, geo.rm, 2.0 * h.data
        )
    q0 = 0.5 * (q0 + np.swapaxes(q0, -1, -2))
    flux = np.einsum("...pq,...qij->...pij", W - geo.inv, T)
    return (
        TensorField(grid, (2, 0), q0, check=False),
        TensorField(grid, (3, 0), flux, check=False),
    )

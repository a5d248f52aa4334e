"""Optional numba-accelerated right side for the n = 3 Ricci-DeTurck step.

Numerically equivalent to the numpy path in flow._rdt_rhs (same stencils,
same contractions); used only for flat backgrounds in three dimensions,
where the numpy implementation is too slow for the desk-scale runs.
The numpy path remains the reference; agreement is asserted in tests.
"""

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*a, **k):
        def deco(f):
            return f

        return deco if not (len(a) == 1 and callable(a[0])) else a[0]


@njit(cache=True)
def _rdt_rhs_flat3_kernel(g, h):  # pragma: no cover - exercised via wrapper
    N = g.shape[0]
    c1 = 8.0 / (12.0 * h)
    c2 = 1.0 / (12.0 * h)
    gam = np.empty((N, N, N, 3, 3, 3))
    tau = np.empty((N, N, N, 3))
    X = np.empty((N, N, N, 3))
    D = np.empty((3, 3, 3))
    for i in range(N):
        i1, i2 = (i + 1) % N, (i + 2) % N
        im1, im2 = (i - 1) % N, (i - 2) % N
        for j in range(N):
            j1, j2 = (j + 1) % N, (j + 2) % N
            jm1, jm2 = (j - 1) % N, (j - 2) % N
            for k in range(N):
                k1, k2 = (k + 1) % N, (k + 2) % N
                km1, km2 = (k - 1) % N, (k - 2) % N
                for a in range(3):
                    for b in range(3):
                        D[0, a, b] = c1 * (g[i1, j, k, a, b] - g[im1, j, k, a, b]) - c2 * (
                            g[i2, j, k, a, b] - g[im2, j, k, a, b]
                        )
                        D[1, a, b] = c1 * (g[i, j1, k, a, b] - g[i, jm1, k, a, b]) - c2 * (
                            g[i, j2, k, a, b] - g[i, jm2, k, a, b]
                        )
                        D[2, a, b] = c1 * (g[i, j, k1, a, b] - g[i, j, km1, a, b]) - c2 * (
                            g[i, j, k2, a, b] - g[i, j, km2, a, b]
                        )
                a00 = g[i, j, k, 0, 0]
                a01 = g[i, j, k, 0, 1]
                a02 = g[i, j, k, 0, 2]
                a11 = g[i, j, k, 1, 1]
                a12 = g[i, j, k, 1, 2]
                a22 = g[i, j, k, 2, 2]
                cA = a11 * a22 - a12 * a12
                cB = a02 * a12 - a01 * a22
                cC = a01 * a12 - a02 * a11
                det = a00 * cA + a01 * cB + a02 * cC
                w00 = cA / det
                w01 = cB / det
                w02 = cC / det
                w11 = (a00 * a22 - a02 * a02) / det
                w12 = (a01 * a02 - a00 * a12) / det
                w22 = (a00 * a11 - a01 * a01) / det
                ginv = np.empty((3, 3))
                ginv[0, 0] = w00
                ginv[0, 1] = ginv[1, 0] = w01
                ginv[0, 2] = ginv[2, 0] = w02
                ginv[1, 1] = w11
                ginv[1, 2] = ginv[2, 1] = w12
                ginv[2, 2] = w22
                for c in range(3):
                    for a in range(3):
                        for b in range(3):
                            s = 0.0
                            for l in range(3):
                                s += ginv[c, l] * (D[a, b, l] + D[b, a, l] - D[l, a, b])
                            gam[i, j, k, c, a, b] = 0.5 * s
                for c in range(3):
                    t = 0.0
                    x = 0.0
                    for a in range(3):
                        t += gam[i, j, k, a, a, c]
                        for b in range(3):
                            x -= ginv[a, b] * gam[i, j, k, c, a, b]
                    tau[i, j, k, c] = t
                    X[i, j, k, c] = x

    out = np.empty_like(g)
    for i in range(N):
        i1, i2 = (i + 1) % N, (i + 2) % N
        im1, im2 = (i - 1) % N, (i - 2) % N
        for j in range(N):
            j1, j2 = (j + 1) % N, (j + 2) % N
            jm1, jm2 = (j - 1) % N, (j - 2) % N
            for k in range(N):
                k1, k2 = (k + 1) % N, (k + 2) % N
                km1, km2 = (k - 1) % N, (k - 2) % N
                ric = np.zeros((3, 3))
                # A_bc = sum_a d_a Gamma^a_bc, gathered per axis
                for b in range(3):
                    for c in range(3):
                        A = (
                            c1 * (gam[i1, j, k, 0, b, c] - gam[im1, j, k, 0, b, c])
                            - c2 * (gam[i2, j, k, 0, b, c] - gam[im2, j, k, 0, b, c])
                            + c1 * (gam[i, j1, k, 1, b, c] - gam[i, jm1, k, 1, b, c])
                            - c2 * (gam[i, j2, k, 1, b, c] - gam[i, jm2, k, 1, b, c])
                            + c1 * (gam[i, j, k1, 2, b, c] - gam[i, j, km1, 2, b, c])
                            - c2 * (gam[i, j, k2, 2, b, c] - gam[i, j, km2, 2, b, c])
                        )
                        ric[b, c] = A
                # B_bc = d_b tau_c
                for c in range(3):
                    ric[0, c] -= c1 * (tau[i1, j, k, c] - tau[im1, j, k, c]) - c2 * (
                        tau[i2, j, k, c] - tau[im2, j, k, c]
                    )
                    ric[1, c] -= c1 * (tau[i, j1, k, c] - tau[i, jm1, k, c]) - c2 * (
                        tau[i, j2, k, c] - tau[i, jm2, k, c]
                    )
                    ric[2, c] -= c1 * (tau[i, j, k1, c] - tau[i, j, km1, c]) - c2 * (
                        tau[i, j, k2, c] - tau[i, j, km2, c]
                    )
                for b in range(3):
                    for c in range(3):
                        s = 0.0
                        for p in range(3):
                            s += tau[i, j, k, p] * gam[i, j, k, p, b, c]
                            for a in range(3):
                                s -= gam[i, j, k, a, b, p] * gam[i, j, k, p, a, c]
                        ric[b, c] += s
                # symmetrize, then assemble -2 Ric - Lie_X g
                for b in range(3):
                    for c in range(3):
                        rs = 0.5 * (ric[b, c] + ric[c, b])
                        dg = 0.0
                        for a in range(3):
                            if a == 0:
                                da = c1 * (g[i1, j, k, b, c] - g[im1, j, k, b, c]) - c2 * (
                                    g[i2, j, k, b, c] - g[im2, j, k, b, c]
                                )
                            elif a == 1:
                                da = c1 * (g[i, j1, k, b, c] - g[i, jm1, k, b, c]) - c2 * (
                                    g[i, j2, k, b, c] - g[i, jm2, k, b, c]
                                )
                            else:
                                da = c1 * (g[i, j, k1, b, c] - g[i, j, km1, b, c]) - c2 * (
                                    g[i, j, k2, b, c] - g[i, j, km2, b, c]
                                )
                            dg += X[i, j, k, a] * da
                        lie = dg
                        for a in range(3):
                            dXb = (
                                c1 * (X[i1, j, k, a] - X[im1, j, k, a])
                                - c2 * (X[i2, j, k, a] - X[im2, j, k, a])
                                if b == 0
                                else c1 * (X[i, j1, k, a] - X[i, jm1, k, a])
                                - c2 * (X[i, j2, k, a] - X[i, jm2, k, a])
                                if b == 1
                                else c1 * (X[i, j, k1, a] - X[i, j, km1, a])
                                - c2 * (X[i, j, k2, a] - X[i, j, km2, a])
                            )
                            dXc = (
                                c1 * (X[i1, j, k, a] - X[im1, j, k, a])
                                - c2 * (X[i2, j, k, a] - X[im2, j, k, a])
                                if c == 0
                                else c1 * (X[i, j1, k, a] - X[i, jm1, k, a])
                                - c2 * (X[i, j2, k, a] - X[i, jm2, k, a])
                                if c == 1
                                else c1 * (X[i, j, k1, a] - X[i, j, km1, a])
                                - c2 * (X[i, j, k2, a] - X[i, j, km2, a])
                            )
                            lie += g[i, j, k, a, c] * dXb + g[i, j, k, b, a] * dXc
                        out[i, j, k, b, c] = -2.0 * rs - lie
    return out


def rdt_rhs_flat3(gdata, spacing):
    """Fused right side for dim = 3, flat background."""
    return _rdt_rhs_flat3_kernel(np.ascontiguousarray(gdata), spacing)


@njit(cache=True)
def _eig_range3_kernel(g):  # pragma: no cover - exercised via wrapper
    flat = g.reshape(-1, 3, 3)
    lo = 1e300
    hi = -1e300
    loc = 0
    for p in range(flat.shape[0]):
        a00 = flat[p, 0, 0]
        a01 = flat[p, 0, 1]
        a02 = flat[p, 0, 2]
        a11 = flat[p, 1, 1]
        a12 = flat[p, 1, 2]
        a22 = flat[p, 2, 2]
        q = (a00 + a11 + a22) / 3.0
        b00, b11, b22 = a00 - q, a11 - q, a22 - q
        p2 = (b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * (a01 * a01 + a02 * a02 + a12 * a12)) / 6.0
        if p2 <= 0.0:
            emin = emax = q
        else:
            ps = np.sqrt(p2)
            c00, c11, c22 = b00 / ps, b11 / ps, b22 / ps
            c01, c02, c12 = a01 / ps, a02 / ps, a12 / ps
            detb = (
                c00 * (c11 * c22 - c12 * c12)
                + c01 * (c12 * c02 - c01 * c22)
                + c02 * (c01 * c12 - c02 * c11)
            )
            r = 0.5 * detb
            if r < -1.0:
                r = -1.0
            elif r > 1.0:
                r = 1.0
            phi = np.arccos(r) / 3.0
            emax = q + 2.0 * ps * np.cos(phi)
            emin = q + 2.0 * ps * np.cos(phi + 2.0943951023931953)
        if emin < lo:
            lo = emin
            loc = p
        if emax > hi:
            hi = emax
    return lo, hi, loc


def eig_range3(gdata):
    """(min eig, max eig, argmin flat index) over a 3x3 symmetric field."""
    return _eig_range3_kernel(np.ascontiguousarray(gdata))

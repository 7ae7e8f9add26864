"""Slow reference evaluations used to cross-check the fast assembly path.

Nothing here shares code with the operator modules beyond reading mesh
geometry and the basis coefficients that define a field:

* cell integrals use a vertex-0 fan with tensor Gauss-Legendre (Duffy) rules;
* basis functions are expanded into global power series and differentiated
  with ``numpy.polynomial``;
* discrete Laplacians and reconstructions are obtained from plain monomial
  mass/stiffness solves, with boundary integrals written against the
  outward cell normal instead of the face normal plus a sign.
"""

from __future__ import annotations

from math import comb

import numpy as np
from numpy.polynomial import legendre
from numpy.polynomial import polynomial as npoly

from ..basis import dim_p, monomial_exponents

__all__ = [
    "fan_rule",
    "edge_rule",
    "power_series",
    "wg_form",
    "hho_form",
    "cell_load_vector",
    "wg_laplacian_values",
    "hho_reconstruction_values",
    "local_stabilization",
]


def _gl01(n):
    t, w = legendre.leggauss(n)
    return 0.5 * (t + 1), 0.5 * w


def fan_rule(polygon, degree):
    """Triangles (v0, v_i, v_{i+1}) with a collapsed tensor Gauss-Legendre rule."""
    n = (degree + 1) // 2 + 2
    u, wu = _gl01(n)
    v, wv = _gl01(n)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv) * U
    xi = (U * (1 - V)).ravel()
    eta = (U * V).ravel()
    W = W.ravel()
    pts, wts = [], []
    a = polygon[0]
    for i in range(1, len(polygon) - 1):
        e1 = polygon[i] - a
        e2 = polygon[i + 1] - a
        det = abs(e1[0] * e2[1] - e1[1] * e2[0])
        pts.append(a + np.outer(xi, e1) + np.outer(eta, e2))
        wts.append(W * det)
    return np.vstack(pts), np.concatenate(wts)


def edge_rule(a, b, degree):
    n = degree // 2 + 2
    s, w = _gl01(n)
    L = np.linalg.norm(b - a)
    return a + np.outer(s, b - a), w * L, s


def power_series(basis):
    """Global coefficient arrays c[a, b] (of x^a y^b) for every function of a cell basis."""
    k = basis.degree
    cx, cy = basis.center
    h = basis.h
    exps = monomial_exponents(k)
    shifted = []
    for a, b in exps:
        px = np.array([comb(a, i) * (-cx) ** (a - i) for i in range(a + 1)]) / h**a
        py = np.array([comb(b, j) * (-cy) ** (b - j) for j in range(b + 1)]) / h**b
        c = np.zeros((k + 1, k + 1))
        c[: a + 1, : b + 1] = np.outer(px, py)
        shifted.append(c)
    shifted = np.array(shifted)
    return np.einsum("ij,jab->iab", basis.coeffs, shifted)


def _ev(c, pts, dx=0, dy=0):
    if dx:
        c = npoly.polyder(c, dx, axis=0)
    if dy:
        c = npoly.polyder(c, dy, axis=1)
    return npoly.polyval2d(pts[:, 0], pts[:, 1], c)


def _field_poly(basis, coeffs):
    return np.tensordot(coeffs, power_series(basis), axes=1)


def _monomials(k, center, pts, dx=0, dy=0):
    out = []
    for a, b in monomial_exponents(k):
        c = np.zeros((k + 1, k + 1))
        c[a, b] = 1.0
        # shift to the cell center to keep the mass matrix tame
        X = pts - center
        out.append(_ev(c, X, dx, dy))
    return np.array(out)


def _face_poly(values, length, s):
    """Orthonormal scaled Legendre expansion on a face, s in [0, 1] along the face direction."""
    t = 2 * s - 1
    out = np.zeros_like(s)
    dout = np.zeros_like(s)
    for j, c in enumerate(values):
        scale = np.sqrt((2 * j + 1) / length)
        e = np.zeros(j + 1)
        e[j] = 1.0
        out += c * scale * legendre.legval(t, e)
        if j:
            dout += c * scale * legendre.legval(t, legendre.legder(e)) * 2 / length
    return out, dout


def _cell_geometry(mesh, K):
    poly = mesh.cell_polygon(K)
    n = len(poly)
    edges = []
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        d = b - a
        L = np.linalg.norm(d)
        t = d / L
        edges.append((a, b, L, t, np.array([t[1], -t[0]])))
    return poly, edges


def _face_of(mesh, K, a, b):
    for S in mesh.cell_faces[K]:
        p, q = mesh.face_endpoints(S)
        if (np.allclose(p, a) and np.allclose(q, b)) or (np.allclose(p, b) and np.allclose(q, a)):
            return S
    raise KeyError("edge not found")


def _face_data(field_, mesh, S, pts):
    """Face value, its derivative along the stored face direction, and normal data."""
    p, q = mesh.face_endpoints(S)
    L = mesh.face_length[S]
    s = (pts - p) @ (q - p) / L**2
    val, dval = _face_poly(field_.face_value[S], L, s)
    gam, _ = _face_poly(field_.face_normal[S], L, s)
    return val, dval, gam, (q - p) / L


def _local_terms(disc, field_, K, qdeg):
    """Shared per-cell ingredients for the reference forms."""
    mesh = disc.mesh
    basis = disc.elements[K].basis
    cpoly = _field_poly(basis, field_.cell[K])
    poly, edges = _cell_geometry(mesh, K)
    return mesh, basis, cpoly, poly, edges


def _wg_laplacian(disc, field_, K, qdeg):
    mesh, basis, cpoly, poly, edges = _local_terms(disc, field_, K, qdeg)
    k = disc.k
    c = basis.center
    pts, w = fan_rule(poly, qdeg)
    M = _monomials(k - 2, c, pts)
    mass = (M * w) @ M.T
    rhs = (_monomials(k - 2, c, pts, 2, 0) + _monomials(k - 2, c, pts, 0, 2)) @ (w * _ev(cpoly, pts))
    for a, b, L, t, n in edges:
        S = _face_of(mesh, K, a, b)
        if mesh.face_cells[S, 1] < 0:
            continue
        fp, fw, _ = edge_rule(a, b, qdeg)
        val, _, gam, _ = _face_data(field_, mesh, S, fp)
        g_out = gam * np.sign(n @ mesh.face_normal[S])
        phi = _monomials(k - 2, c, fp)
        dphi = n[0] * _monomials(k - 2, c, fp, 1, 0) + n[1] * _monomials(k - 2, c, fp, 0, 1)
        rhs += phi @ (fw * g_out) - dphi @ (fw * val)
    coef = np.linalg.solve(mass, rhs)
    return coef, mass


def _stab_wg_hho(disc, u, v, K, qdeg, kind):
    mesh = disc.mesh
    basis = disc.elements[K].basis
    k = disc.k
    pu = _field_poly(basis, u.cell[K])
    pv = _field_poly(basis, v.cell[K])
    poly, edges = _cell_geometry(mesh, K)
    total = 0.0
    for a, b, L, t, n in edges:
        S = _face_of(mesh, K, a, b)
        fp, fw, s = edge_rule(a, b, qdeg)
        nu = mesh.face_normal[S]
        interior = mesh.face_cells[S, 1] >= 0
        res = []
        for f, pf in ((u, pu), (v, pv)):
            if interior:
                val, _, gam, _ = _face_data(f, mesh, S, fp)
            else:
                val = gam = np.zeros(len(fw))
            r0 = _ev(pf, fp) - val
            r1 = _ev(pf, fp, 1, 0) * nu[0] + _ev(pf, fp, 0, 1) * nu[1] - gam
            if kind == "hho":
                # L2 projection onto P_{k-2}(S) by a monomial mass solve in s
                V = np.vander(s, k - 1, increasing=True).T
                r1 = V.T @ np.linalg.solve((V * fw) @ V.T, V @ (fw * r1))
            res.append((r0, r1))
        (u0, u1), (v0, v1) = res
        total += L**-3 * fw @ (u0 * v0) + L**-1 * fw @ (u1 * v1)
    return total


def wg_form(disc, u, v, qdeg=None):
    """a_h(u, v) of the WG method by the slow path."""
    qdeg = qdeg or 2 * disc.k + 4
    total = 0.0
    for K in range(disc.n_cells):
        cu, mass = _wg_laplacian(disc, u, K, qdeg)
        cv, _ = _wg_laplacian(disc, v, K, qdeg)
        total += cv @ mass @ cu
        total += _stab_wg_hho(disc, u, v, K, qdeg, "wg")
    return float(total)


def _hho_reconstruction(disc, field_, K, qdeg):
    mesh, basis, cpoly, poly, edges = _local_terms(disc, field_, K, qdeg)
    k = disc.k
    c = basis.center
    pts, w = fan_rule(poly, qdeg)
    n_k = dim_p(k)
    H = [_monomials(k, c, pts, 2, 0), _monomials(k, c, pts, 1, 1), _monomials(k, c, pts, 0, 2)]
    A = (H[0] * w) @ H[0].T + 2 * (H[1] * w) @ H[1].T + (H[2] * w) @ H[2].T
    bil = _monomials(k, c, pts, 4, 0) + 2 * _monomials(k, c, pts, 2, 2) + _monomials(k, c, pts, 0, 4)
    rhs = bil @ (w * _ev(cpoly, pts))
    for a, b, L, t, n in edges:
        S = _face_of(mesh, K, a, b)
        if mesh.face_cells[S, 1] < 0:
            continue
        fp, fw, _ = edge_rule(a, b, qdeg)
        val, dval, gam, fdir = _face_data(field_, mesh, S, fp)
        g_out = gam * np.sign(n @ mesh.face_normal[S])
        dt_val = dval * np.sign(t @ fdir)
        d = {(i, j): _monomials(k, c, fp, i, j) for i in range(4) for j in range(4 - i)}
        dnn = n[0] ** 2 * d[2, 0] + 2 * n[0] * n[1] * d[1, 1] + n[1] ** 2 * d[0, 2]
        dnt = n[0] * t[0] * d[2, 0] + (n[0] * t[1] + n[1] * t[0]) * d[1, 1] + n[1] * t[1] * d[0, 2]
        dnlap = n[0] * (d[3, 0] + d[1, 2]) + n[1] * (d[2, 1] + d[0, 3])
        rhs += dnn @ (fw * g_out) + dnt @ (fw * dt_val) - dnlap @ (fw * val)
    # P_1 moments of R equal those of v_K
    P1 = _monomials(1, c, pts)
    Mk = _monomials(k, c, pts)
    C = (P1 * w) @ Mk.T
    d1 = P1 @ (w * _ev(cpoly, pts))
    n_c = 3
    big = np.zeros((n_k + n_c, n_k + n_c))
    big[:n_k, :n_k] = A
    big[:n_k, n_k:] = C.T
    big[n_k:, :n_k] = C
    sol = np.linalg.lstsq(big, np.concatenate([rhs, d1]), rcond=None)[0]
    return sol[:n_k], A


def hho_form(disc, u, v, qdeg=None):
    """a_h(u, v) of the HHO method by the slow path."""
    qdeg = qdeg or 2 * disc.k + 4
    total = 0.0
    for K in range(disc.n_cells):
        ru, A = _hho_reconstruction(disc, u, K, qdeg)
        rv, _ = _hho_reconstruction(disc, v, K, qdeg)
        total += rv @ A @ ru
        total += _stab_wg_hho(disc, u, v, K, qdeg, "hho")
    return float(total)


def cell_load_vector(disc, f, qdeg=None):
    """(f, phi_i)_K for all cells by the fan rule and power-series basis values."""
    qdeg = qdeg or 2 * disc.k + 10
    out = []
    for K, elem in enumerate(disc.elements):
        pts, w = fan_rule(disc.mesh.cell_polygon(K), qdeg)
        ps = power_series(elem.basis)
        vals = np.array([_ev(c, pts) for c in ps])
        out.append(vals @ (w * f(pts)))
    return np.concatenate(out)


def wg_laplacian_values(disc, field_, K, points, qdeg=None):
    """Delta_h v on cell ``K`` evaluated at ``points`` (monomial mass solve)."""
    coef, _ = _wg_laplacian(disc, field_, K, qdeg or 2 * disc.k + 4)
    return coef @ _monomials(disc.k - 2, disc.elements[K].basis.center, np.atleast_2d(points))


def hho_reconstruction_values(disc, field_, K, points, qdeg=None):
    """R_h v on cell ``K`` evaluated at ``points`` (bordered monomial solve)."""
    coef, _ = _hho_reconstruction(disc, field_, K, qdeg or 2 * disc.k + 4)
    return coef @ _monomials(disc.k, disc.elements[K].basis.center, np.atleast_2d(points))


def local_stabilization(disc, method, u, v, K, qdeg=None):
    """s_K(u, v) for WG or HHO fields by face-by-face quadrature."""
    return float(_stab_wg_hho(disc, u, v, K, qdeg or 2 * disc.k + 4, method))

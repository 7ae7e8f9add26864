"""Orthonormal polynomial bases, quadrature and L2 projections on cells and faces."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy.special import roots_jacobi

from .errors import ConditioningError, InvalidDegreeError, UnsupportedDegreeError, UnsupportedOrderError

__all__ = [
    "QuadRule",
    "CellBasis",
    "FaceBasis",
    "dim_p",
    "monomial_exponents",
    "segment_rule",
    "triangle_rule",
    "quadrature",
    "cell_quadrature",
    "face_quadrature",
    "build_cell_basis",
    "build_face_basis",
    "eval_basis",
    "project_l2",
]

MAX_QUAD_DEGREE = 80


def dim_p(k):
    """Dimension of P_k in two variables."""
    return (k + 1) * (k + 2) // 2 if k >= 0 else 0


def monomial_exponents(k):
    """Graded exponents (a, b) of x^a y^b, total degree 0..k."""
    return np.array([(d - b, b) for d in range(k + 1) for b in range(d + 1)], dtype=int).reshape(-1, 2)


@dataclass(frozen=True)
class QuadRule:
    """Points and positive weights; ``params`` holds the segment coordinate in [-1, 1] for face rules."""

    points: np.ndarray
    weights: np.ndarray
    degree: int
    params: np.ndarray | None = None

    def integrate(self, values):
        return np.dot(np.asarray(values), self.weights)


def _check_degree(degree):
    if degree < 0 or degree > MAX_QUAD_DEGREE:
        raise UnsupportedDegreeError(f"quadrature degree {degree} outside [0, {MAX_QUAD_DEGREE}]")


@lru_cache(maxsize=None)
def _gauss(degree):
    n = degree // 2 + 1
    return legendre.leggauss(n)


@lru_cache(maxsize=None)
def _collapsed_triangle(degree):
    # Duffy map of the unit square onto the reference triangle; the Jacobian
    # (1 - u) is absorbed by a Gauss-Jacobi rule in u.
    n = degree // 2 + 1
    xu, wu = roots_jacobi(n, 1.0, 0.0)
    xv, wv = legendre.leggauss(n)
    u = 0.5 * (xu + 1.0)
    v = 0.5 * (xv + 1.0)
    wu = wu / 4.0
    wv = wv / 2.0
    U, V = np.meshgrid(u, v, indexing="ij")
    xi = U.ravel()
    eta = (V * (1.0 - U)).ravel()
    w = np.outer(wu, wv).ravel()
    return np.column_stack([xi, eta]), w


def segment_rule(a, b, degree):
    """Gauss-Legendre rule on the segment [a, b], exact to ``degree``."""
    _check_degree(degree)
    t, w = _gauss(degree)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.linalg.norm(b - a)) if a.ndim else abs(float(b - a))
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = mid + np.multiply.outer(t, half)
    return QuadRule(pts, 0.5 * length * w, degree, params=t)


def triangle_rule(tri, degree):
    """Collapsed Gauss rule on the triangle with vertices ``tri`` (3, 2)."""
    _check_degree(degree)
    ref, w = _collapsed_triangle(degree)
    A, B, C = np.asarray(tri, dtype=float)
    J = np.column_stack([B - A, C - A])
    det = abs(np.linalg.det(J))
    return QuadRule(A + ref @ J.T, w * det, degree)


def quadrature(domain, degree):
    """Rule exact to ``degree`` on a polygon (centroid fan) or a segment (Gauss).

    ``domain`` is an (n, 2) array of vertices; n == 2 means a segment.
    """
    domain = np.asarray(domain, dtype=float)
    if len(domain) == 2:
        return segment_rule(domain[0], domain[1], degree)
    return _polygon_rule(domain, degree)


def _polygon_rule(poly, degree, centroid=None):
    from .mesh import _polygon_centroid

    _check_degree(degree)
    c = _polygon_centroid(poly) if centroid is None else centroid
    ref, w = _collapsed_triangle(degree)
    nxt = np.roll(poly, -1, axis=0)
    e1 = poly - c
    e2 = nxt - c
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    # points: c + xi*e1 + eta*e2 for every fan triangle
    pts = c + ref[None, :, 0:1] * e1[:, None, :] + ref[None, :, 1:2] * e2[:, None, :]
    weights = np.abs(det)[:, None] * w[None, :]
    return QuadRule(pts.reshape(-1, 2), weights.ravel(), degree)


def cell_quadrature(mesh, K, degree):
    return _polygon_rule(mesh.cell_polygon(K), degree, mesh.cell_centroid[K])


def face_quadrature(mesh, S, degree):
    a, b = mesh.face_endpoints(S)
    return segment_rule(a, b, degree)


# --------------------------------------------------------------------------- cell basis


def _falling(n, r):
    out = np.ones_like(n, dtype=float)
    for i in range(r):
        out = out * (n - i)
    return out


class CellBasis:
    """L2-orthonormal basis of P_k(K) in scaled monomials ((x - x_K)/h_K)^alpha.

    Row ``i`` of ``coeffs`` expands basis function i in the monomials listed
    by ``exponents``.  Since ``coeffs`` is lower triangular in the graded
    ordering, the first dim P_j functions span P_j(K) for every j <= k.
    """

    def __init__(self, degree, center, h, coeffs, polygon=None):
        self.degree = int(degree)
        self.center = np.asarray(center, dtype=float)
        self.h = float(h)
        self.coeffs = coeffs
        self.exponents = monomial_exponents(self.degree)
        self.polygon = polygon

    @property
    def dim(self):
        return dim_p(self.degree)

    def monomials(self, points, dx=0, dy=0):
        """Partial derivative (dx, dy) of the scaled monomials, shape (dim, npts)."""
        points = np.atleast_2d(points)
        xi = (points[:, 0] - self.center[0]) / self.h
        eta = (points[:, 1] - self.center[1]) / self.h
        a = self.exponents[:, 0]
        b = self.exponents[:, 1]
        pa = np.clip(a - dx, 0, None)
        pb = np.clip(b - dy, 0, None)
        coef = _falling(a, dx) * _falling(b, dy) / self.h ** (dx + dy)
        return coef[:, None] * xi[None, :] ** pa[:, None] * eta[None, :] ** pb[:, None]

    def partial(self, points, dx=0, dy=0):
        """Partial derivative (dx, dy) of the basis functions, shape (dim, npts)."""
        return self.coeffs @ self.monomials(points, dx, dy)

    def __call__(self, points):
        return self.partial(points)

    def derivatives(self, points, order):
        """All partials of total order ``order``: shape (dim, order + 1, npts), component j = d^{order-j}/dx d^j/dy."""
        return np.stack([self.partial(points, order - j, j) for j in range(order + 1)], axis=1)

    def evaluate(self, coefficients, points, dx=0, dy=0):
        """Value of sum_i c_i phi_i (or its partial) at ``points``."""
        c = np.asarray(coefficients)
        return c @ self.partial(points, dx, dy)[: len(c)]


def build_cell_basis(polygon, k, rule=None, center=None, h=None):
    """Orthonormal basis of P_k on the polygon, via two Cholesky passes on the Gram matrix."""
    if k < 0:
        raise InvalidDegreeError(f"polynomial degree must be >= 0, got {k}")
    polygon = np.asarray(polygon, dtype=float)
    if center is None:
        from .mesh import _polygon_centroid

        center = _polygon_centroid(polygon)
    if h is None:
        d = polygon[:, None, :] - polygon[None, :, :]
        h = float(np.sqrt((d**2).sum(-1)).max())
    if rule is None:
        rule = _polygon_rule(polygon, 2 * k + 2, center)
    n = dim_p(k)
    raw = CellBasis(k, center, h, np.eye(n), polygon)
    M = raw.monomials(rule.points)
    G = (M * rule.weights) @ M.T
    C = np.eye(n)
    for _ in range(2):
        try:
            L = np.linalg.cholesky(G)
        except np.linalg.LinAlgError as exc:
            raise ConditioningError(f"Gram matrix of degree {k} is not positive definite") from exc
        d = np.diag(L)
        if d.min() <= 1e-13 * d.max():
            raise ConditioningError(f"Gram matrix of degree {k} is numerically singular")
        Linv = np.linalg.solve(L, np.eye(n))
        C = Linv @ C
        G = Linv @ G @ Linv.T
    return CellBasis(k, center, h, C, polygon)


def eval_basis(basis, points, order):
    """Partial derivatives of total order 0..3 of a cell or face basis.

    Cell basis: (dim, order + 1, npts).  Face basis: (dim, npts), arc-length
    derivatives along the face tangent.
    """
    if order < 0 or order > 3:
        raise UnsupportedOrderError(f"derivative order {order} not supported (0..3)")
    if isinstance(basis, FaceBasis):
        return basis.partial(basis.param(points), order)
    return basis.derivatives(points, order)


# --------------------------------------------------------------------------- face basis


class FaceBasis:
    """Orthonormal scaled Legendre basis of P_m(S) in the arc-length coordinate.

    The segment is parametrized as x(t) = midpoint + t * length/2 * tangent,
    t in [-1, 1]; ``partial(t, r)`` returns the r-th arc-length derivative.
    """

    def __init__(self, degree, start, end):
        self.degree = int(degree)
        self.start = np.asarray(start, dtype=float)
        self.end = np.asarray(end, dtype=float)
        d = self.end - self.start
        self.length = float(np.linalg.norm(d))
        self.tangent = d / self.length
        self.midpoint = 0.5 * (self.start + self.end)
        self.scale = np.sqrt((2 * np.arange(self.degree + 1) + 1) / self.length)

    @property
    def dim(self):
        return self.degree + 1

    def param(self, points):
        points = np.atleast_2d(points)
        return 2.0 * (points - self.midpoint) @ self.tangent / self.length

    def partial(self, t, order=0):
        t = np.asarray(t, dtype=float)
        out = np.empty((self.dim, t.size))
        for j in range(self.dim):
            c = np.zeros(j + 1)
            c[j] = 1.0
            if order:
                c = legendre.legder(c, order) * (2.0 / self.length) ** order
            out[j] = legendre.legval(t, c) if c.size else 0.0
        return self.scale[:, None] * out

    def __call__(self, points):
        return self.partial(self.param(points))


def build_face_basis(start, end, m):
    if m < 0:
        raise InvalidDegreeError(f"face degree must be >= 0, got {m}")
    return FaceBasis(m, start, end)


# --------------------------------------------------------------------------- projections


def project_l2(function, target, rule=None):
    """Coefficients of the L2 projection of ``function`` onto a cell or face basis.

    ``function`` maps an (n, 2) array of points to n values.
    """
    if isinstance(target, FaceBasis):
        if rule is None:
            rule = segment_rule(target.start, target.end, 2 * target.degree + 2)
        values = np.asarray(function(rule.points), dtype=float)
        return target(rule.points) @ (rule.weights * values)
    if rule is None:
        rule = _polygon_rule(target.polygon, 2 * target.degree + 2, target.center)
    values = np.asarray(function(rule.points), dtype=float)
    return target.partial(rule.points) @ (rule.weights * values)

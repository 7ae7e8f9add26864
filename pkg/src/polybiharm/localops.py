"""Cell-local operators of the WG, interior-penalty DG and HHO discretizations.

All global operators decouple cell by cell because the test functions are
broken.  A test function supported on ``K`` has jumps ``[phi]_S = sigma_K phi``
and ``[grad phi]_S . nu_S = sigma_K grad phi . nu_S`` with the orientation sign
``sigma_K = nu_K . nu_S``, and boundary faces are dropped from the face sums
(homogeneous clamped data).

Local vectors of the hybrid methods are laid out as
``[cell | value(face 0) | normal(face 0) | value(face 1) | ...]`` following
the edge order of the cell; boundary-face blocks exist locally but are
always zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .basis import build_cell_basis, build_face_basis, cell_quadrature, dim_p, face_quadrature
from .errors import ConditioningError, InvalidDegreeError, InvalidParameterError

__all__ = [
    "Discretization",
    "HybridField",
    "field_kind",
    "normal_degree",
    "wg_laplacian_map",
    "wg_discrete_laplacian",
    "hho_reconstruction_map",
    "hho_reconstruction",
    "stabilization_matrix",
    "local_stabilization",
    "galerkin_projection",
    "interpolate",
    "dg_laplacian_operator",
    "dg_discrete_laplacian",
    "dg_face_traces",
]

HYBRID = ("wg", "hho")


def field_kind(method):
    """Map a method name (wg, sip, nip, dg, hho) to its field tag."""
    method = method.lower()
    if method in ("sip", "nip", "dg"):
        return "dg"
    if method in HYBRID:
        return method
    raise InvalidParameterError(f"unknown method {method!r}")


def normal_degree(method, k):
    """Degree of the face normal-derivative unknowns (None for DG)."""
    kind = field_kind(method)
    return {"wg": k - 1, "hho": k - 2, "dg": None}[kind]


@dataclass
class FaceTrace:
    """Traces of the cell basis on one face, seen from the cell."""

    face: int
    sign: int
    interior: bool
    normal: np.ndarray
    length: float
    weights: np.ndarray
    vals: np.ndarray
    dn: np.ndarray
    dnn: np.ndarray
    dnt: np.ndarray
    lap: np.ndarray
    dnlap: np.ndarray


class CellElement:
    """Basis and quadrature tables of one cell.

    Tables are (dim P_k, n_points): ``phi``, Hessian components ``dxx``,
    ``dxy``, ``dyy``, ``lap`` and ``bilap``.
    """

    def __init__(self, mesh, K, k, qdeg, face_rules):
        self.index = K
        self.k = k
        self.h = float(mesh.cell_diameter[K])
        self.rule = cell_quadrature(mesh, K, qdeg)
        self.basis = build_cell_basis(
            mesh.cell_polygon(K), k, rule=self.rule, center=mesh.cell_centroid[K], h=self.h
        )
        pts = self.rule.points
        b = self.basis
        self.weights = self.rule.weights
        self.phi = b.partial(pts)
        self.dxx = b.partial(pts, 2, 0)
        self.dxy = b.partial(pts, 1, 1)
        self.dyy = b.partial(pts, 0, 2)
        self.lap = self.dxx + self.dyy
        self.bilap = b.partial(pts, 4, 0) + 2 * b.partial(pts, 2, 2) + b.partial(pts, 0, 4)

        self.faces = []
        for S, sign in zip(mesh.cell_faces[K], mesh.cell_signs[K]):
            rule = face_rules[S]
            p = rule.points
            nu = mesh.face_normal[S]
            tau = mesh.face_tangent[S]
            gx, gy = b.partial(p, 1, 0), b.partial(p, 0, 1)
            hxx, hxy, hyy = b.partial(p, 2, 0), b.partial(p, 1, 1), b.partial(p, 0, 2)
            t3 = [b.partial(p, 3 - j, j) for j in range(4)]
            lap_grad = (t3[0] + t3[2], t3[1] + t3[3])
            self.faces.append(
                FaceTrace(
                    face=int(S),
                    sign=int(sign),
                    interior=bool(mesh.face_cells[S, 1] >= 0),
                    normal=nu,
                    length=float(mesh.face_length[S]),
                    weights=rule.weights,
                    vals=b.partial(p),
                    dn=nu[0] * gx + nu[1] * gy,
                    dnn=nu[0] ** 2 * hxx + 2 * nu[0] * nu[1] * hxy + nu[1] ** 2 * hyy,
                    dnt=nu[0] * tau[0] * hxx + (nu[0] * tau[1] + nu[1] * tau[0]) * hxy + nu[1] * tau[1] * hyy,
                    lap=hxx + hyy,
                    dnlap=nu[0] * lap_grad[0] + nu[1] * lap_grad[1],
                )
            )
        self._face_pos = {f.face: i for i, f in enumerate(self.faces)}

    @property
    def dim(self):
        return self.phi.shape[0]

    def trace(self, S):
        return self.faces[self._face_pos[S]]

    def hessian_gram(self):
        w = self.weights
        return (self.dxx * w) @ self.dxx.T + 2 * (self.dxy * w) @ self.dxy.T + (self.dyy * w) @ self.dyy.T


class Discretization:
    """Per-mesh cache of cell elements and face bases for polynomial degree ``k``."""

    def __init__(self, mesh, k, quad_degree=None):
        if k < 2:
            raise InvalidDegreeError(f"degree k must be >= 2, got {k}")
        self.mesh = mesh
        self.k = int(k)
        self.quad_degree = int(quad_degree or 2 * k + 2)
        self.face_rules = [face_quadrature(mesh, S, self.quad_degree) for S in range(mesh.n_faces)]
        self.elements = [CellElement(mesh, K, self.k, self.quad_degree, self.face_rules) for K in range(mesh.n_cells)]
        self._face_tables = {}

    def face_basis(self, S, m):
        a, b = self.mesh.face_endpoints(S)
        return build_face_basis(a, b, m)

    def face_table(self, S, m, order=0):
        """Face basis of degree m (or its arc-length derivative) at the face rule, (m+1, nq)."""
        key = (S, m, order)
        tab = self._face_tables.get(key)
        if tab is None:
            tab = self.face_basis(S, m).partial(self.face_rules[S].params, order)
            self._face_tables[key] = tab
        return tab

    @property
    def n_cells(self):
        return self.mesh.n_cells


# --------------------------------------------------------------------------- fields


@dataclass
class HybridField:
    """Coefficients of v_h = (v_M, v_Sigma, gamma_Sigma) in the orthonormal bases.

    ``cell`` is (n_cells, dim P_k).  ``face_value`` (n_faces, k+1) and
    ``face_normal`` (n_faces, m+1) are None for DG; their boundary rows are
    zero.  The normal derivative is taken along the fixed face normal nu_S.
    """

    kind: str
    k: int
    cell: np.ndarray
    face_value: np.ndarray | None = None
    face_normal: np.ndarray | None = None

    def local(self, disc, K):
        """Local vector of cell ``K`` in the layout of the module docstring."""
        parts = [self.cell[K]]
        if self.kind != "dg":
            for f in disc.elements[K].faces:
                parts.append(self.face_value[f.face])
                parts.append(self.face_normal[f.face])
        return np.concatenate(parts)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rmul__(self, alpha):
        return HybridField(
            self.kind,
            self.k,
            alpha * self.cell,
            None if self.face_value is None else alpha * self.face_value,
            None if self.face_normal is None else alpha * self.face_normal,
        )

    def _combine(self, other, s):
        if other.kind != self.kind or other.k != self.k:
            raise InvalidParameterError("fields of different kind or degree")
        return HybridField(
            self.kind,
            self.k,
            self.cell + s * other.cell,
            None if self.face_value is None else self.face_value + s * other.face_value,
            None if self.face_normal is None else self.face_normal + s * other.face_normal,
        )

    @classmethod
    def zeros(cls, disc, method):
        kind = field_kind(method)
        k = disc.k
        cell = np.zeros((disc.n_cells, dim_p(k)))
        if kind == "dg":
            return cls(kind, k, cell)
        nf = disc.mesh.n_faces
        m = normal_degree(kind, k)
        return cls(kind, k, cell, np.zeros((nf, k + 1)), np.zeros((nf, m + 1)))

    @classmethod
    def random(cls, disc, method, rng):
        f = cls.zeros(disc, method)
        f.cell[:] = rng.standard_normal(f.cell.shape)
        if f.kind != "dg":
            interior = ~disc.mesh.is_boundary_face
            f.face_value[interior] = rng.standard_normal((interior.sum(), f.face_value.shape[1]))
            f.face_normal[interior] = rng.standard_normal((interior.sum(), f.face_normal.shape[1]))
        return f


def _layout(elem, kind):
    k = elem.k
    nk = dim_p(k)
    if kind == "dg":
        return nk, []
    m = normal_degree(kind, k)
    blocks = []
    pos = nk
    for _ in elem.faces:
        val = slice(pos, pos + k + 1)
        nrm = slice(pos + k + 1, pos + k + 1 + m + 1)
        blocks.append((val, nrm))
        pos += k + 1 + m + 1
    return pos, blocks


def local_size(elem, method):
    return _layout(elem, field_kind(method))[0]


def _check_kind(field_, expected):
    if field_.kind != expected:
        raise InvalidParameterError(f"expected a {expected.upper()} field, got {field_.kind.upper()}")


# --------------------------------------------------------------------------- WG


def wg_laplacian_map(disc, K):
    """Matrix mapping the local WG vector of ``K`` to Delta_h coefficients in P_{k-2}(K)."""
    elem = disc.elements[K]
    k = disc.k
    nl = dim_p(k - 2)
    nk = dim_p(k)
    n, blocks = _layout(elem, "wg")
    B = np.zeros((nl, n))
    w = elem.weights
    B[:, :nk] = (elem.lap[:nl] * w) @ elem.phi.T
    for tr, (val, nrm) in zip(elem.faces, blocks):
        if not tr.interior:
            continue
        fv = disc.face_table(tr.face, k)
        fg = disc.face_table(tr.face, k - 1)
        wf = tr.weights
        B[:, val] = -tr.sign * (tr.dn[:nl] * wf) @ fv.T
        B[:, nrm] = tr.sign * (tr.vals[:nl] * wf) @ fg.T
    return B


def wg_discrete_laplacian(disc, K, local):
    """Coefficients of Delta_h v_h on ``K`` in the first dim P_{k-2} basis functions."""
    if disc.k < 2:
        raise InvalidDegreeError("the discrete Laplacian needs k >= 2")
    return wg_laplacian_map(disc, K) @ np.asarray(local)


# --------------------------------------------------------------------------- HHO


def _bordered_solve(A, rhs, C, Crhs):
    """Solve min-energy system A x = rhs subject to C x = Crhs via a bordered matrix."""
    n = A.shape[0]
    c = C.shape[0]
    s = max(np.trace(A) / n, 1.0)
    M = np.zeros((n + c, n + c))
    M[:n, :n] = A
    M[:n, n:] = s * C.T
    M[n:, :n] = s * C
    R = np.concatenate([rhs, s * Crhs], axis=0)
    try:
        X = np.linalg.solve(M, R)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError("singular constrained local system") from exc
    if not np.all(np.isfinite(X)):
        raise ConditioningError("singular constrained local system")
    return X[:n]


def hho_reconstruction_map(disc, K):
    """Matrix mapping the local HHO vector of ``K`` to coefficients of R_h v_h in P_k(K)."""
    elem = disc.elements[K]
    k = disc.k
    nk = dim_p(k)
    n, blocks = _layout(elem, "hho")
    w = elem.weights
    A = elem.hessian_gram()
    rhs = np.zeros((nk, n))
    rhs[:, :nk] = (elem.bilap * w) @ elem.phi.T
    for tr, (val, nrm) in zip(elem.faces, blocks):
        if not tr.interior:
            continue
        fv = disc.face_table(tr.face, k)
        dfv = disc.face_table(tr.face, k, order=1)
        fg = disc.face_table(tr.face, k - 2)
        wf = tr.weights
        rhs[:, val] = -tr.sign * ((tr.dnlap * wf) @ fv.T - (tr.dnt * wf) @ dfv.T)
        rhs[:, nrm] = tr.sign * (tr.dnn * wf) @ fg.T
    # pin the P_1 kernel: first three orthonormal functions span P_1(K)
    C = np.eye(3, nk)
    Crhs = np.zeros((3, n))
    Crhs[:, :3] = np.eye(3)
    return _bordered_solve(A, rhs, C, Crhs)


def hho_reconstruction(disc, K, local):
    return hho_reconstruction_map(disc, K) @ np.asarray(local)


# --------------------------------------------------------------------------- stabilization


def stabilization_matrix(disc, K, method):
    """Local matrix of the WG or HHO stabilization on cell ``K`` (all faces of K)."""
    kind = field_kind(method)
    if kind == "dg":
        raise InvalidParameterError("DG stabilization is face-based; use dg_face_stabilization")
    elem = disc.elements[K]
    k = disc.k
    nk = dim_p(k)
    m = normal_degree(kind, k)
    n, blocks = _layout(elem, kind)
    S = np.zeros((n, n))
    for tr, (val, nrm) in zip(elem.faces, blocks):
        wf = tr.weights
        fv = disc.face_table(tr.face, k)
        fg = disc.face_table(tr.face, m)
        E0 = np.zeros((len(wf), n))
        E0[:, :nk] = tr.vals.T
        E0[:, val] = -fv.T
        S += tr.length**-3 * (E0.T * wf) @ E0
        if kind == "wg":
            E1 = np.zeros((len(wf), n))
            E1[:, :nk] = tr.dn.T
            E1[:, nrm] = -fg.T
            S += tr.length**-1 * (E1.T * wf) @ E1
        else:
            # Pi_S^{k-2} of the normal-derivative residual, in orthonormal face coefficients
            E1 = np.zeros((m + 1, n))
            E1[:, :nk] = (fg * wf) @ tr.dn.T
            E1[:, nrm] = -np.eye(m + 1)
            S += tr.length**-1 * E1.T @ E1
    return S


def dg_face_traces(disc, S):
    """Jump/average operators of a DG face acting on [dofs(K+), dofs(K-)].

    Returns (cells, weights, h_S, J0, J1, A2, A3) with rows at the face
    quadrature points: J0 = [v], J1 = [grad v].nu, A2 = {lap v},
    A3 = {grad lap v}.nu.  Boundary faces use one-sided traces.
    """
    mesh = disc.mesh
    Kp, Km = mesh.face_cells[S]
    tp = disc.elements[Kp].trace(S)
    if Km < 0:
        return (Kp,), tp.weights, tp.length, tp.vals.T, tp.dn.T, tp.lap.T, tp.dnlap.T
    tm = disc.elements[Km].trace(S)
    J0 = np.hstack([tp.vals.T, -tm.vals.T])
    J1 = np.hstack([tp.dn.T, -tm.dn.T])
    A2 = 0.5 * np.hstack([tp.lap.T, tm.lap.T])
    A3 = 0.5 * np.hstack([tp.dnlap.T, tm.dnlap.T])
    return (Kp, Km), tp.weights, tp.length, J0, J1, A2, A3


def dg_face_stabilization(disc, S):
    cells, w, h, J0, J1, _, _ = dg_face_traces(disc, S)
    return cells, h**-3 * (J0.T * w) @ J0 + h**-1 * (J1.T * w) @ J1


def local_stabilization(disc, method, K, u, v):
    """Local stabilization s_K(u, v).

    WG/HHO: ``u`` and ``v`` are local vectors of cell ``K``.  DG: ``u`` and ``v``
    are DG fields; the faces owned by ``K`` (K = K+) are summed so that every
    face is counted once over the mesh.
    """
    kind = field_kind(method)
    if kind == "dg":
        if not isinstance(u, HybridField) or not isinstance(v, HybridField):
            raise InvalidParameterError("DG stabilization takes DG fields")
        _check_kind(u, "dg")
        _check_kind(v, "dg")
        total = 0.0
        mesh = disc.mesh
        for S in mesh.cell_faces[K]:
            if mesh.face_cells[S, 0] != K:
                continue
            cells, M = dg_face_stabilization(disc, S)
            uu = np.concatenate([u.cell[c] for c in cells])
            vv = np.concatenate([v.cell[c] for c in cells])
            total += vv @ M @ uu
        return float(total)
    if isinstance(u, HybridField) or isinstance(v, HybridField):
        if getattr(u, "kind", kind) != kind or getattr(v, "kind", kind) != kind:
            raise InvalidParameterError("field kind does not match the method")
        u = u.local(disc, K) if isinstance(u, HybridField) else u
        v = v.local(disc, K) if isinstance(v, HybridField) else v
    S = stabilization_matrix(disc, K, kind)
    if len(u) != S.shape[0] or len(v) != S.shape[0]:
        raise InvalidParameterError("local data does not match the method layout")
    return float(np.asarray(v) @ S @ np.asarray(u))


# --------------------------------------------------------------------------- Galerkin projection / interpolation


def _hessian_components(func, points):
    H = np.asarray(func.hessian(points))
    return H[:, 0, 0], H[:, 0, 1], H[:, 1, 1]


def galerkin_projection(disc, K, func, rule=None):
    """Coefficients of G_h v on ``K``: Hessian-orthogonal projection with P_1 moments of v.

    ``func`` provides ``value(points)`` and ``hessian(points)`` (n, 2, 2).
    """
    elem = disc.elements[K]
    if rule is None:
        rule = elem.rule
        dxx, dxy, dyy, phi = elem.dxx, elem.dxy, elem.dyy, elem.phi
        A = elem.hessian_gram()
    else:
        b = elem.basis
        p = rule.points
        dxx, dxy, dyy, phi = b.partial(p, 2, 0), b.partial(p, 1, 1), b.partial(p, 0, 2), b.partial(p)
        w = rule.weights
        A = (dxx * w) @ dxx.T + 2 * (dxy * w) @ dxy.T + (dyy * w) @ dyy.T
    w = rule.weights
    hxx, hxy, hyy = _hessian_components(func, rule.points)
    rhs = dxx @ (w * hxx) + 2 * dxy @ (w * hxy) + dyy @ (w * hyy)
    moments = phi[:3] @ (w * np.asarray(func.value(rule.points)))
    C = np.eye(3, elem.dim)
    return _bordered_solve(A, rhs[:, None], C, moments[:, None])[:, 0]


def interpolate(disc, method, func):
    """Interpolant I_h v: Galerkin projection in the cells, L2 projections on interior faces."""
    kind = field_kind(method)
    out = HybridField.zeros(disc, kind)
    for K in range(disc.n_cells):
        out.cell[K] = galerkin_projection(disc, K, func)
    if kind == "dg":
        return out
    k = disc.k
    m = normal_degree(kind, k)
    mesh = disc.mesh
    for S in mesh.interior_faces:
        rule = disc.face_rules[S]
        w = rule.weights
        vals = np.asarray(func.value(rule.points))
        dn = np.asarray(func.gradient(rule.points)) @ mesh.face_normal[S]
        out.face_value[S] = disc.face_table(S, k) @ (w * vals)
        out.face_normal[S] = disc.face_table(S, m) @ (w * dn)
    return out


# --------------------------------------------------------------------------- DG discrete Laplacian


def dg_laplacian_operator(disc, form="definition"):
    """Sparse map from DG coefficients to Delta_h coefficients (dim P_{k-2} per cell).

    ``form="definition"`` uses averages of v on interior faces;
    ``form="ibp"`` uses the integrated-by-parts identity with jumps of v on all faces.
    """
    if form not in ("definition", "ibp"):
        raise InvalidParameterError(f"unknown form {form!r}")
    mesh = disc.mesh
    k = disc.k
    nk = dim_p(k)
    nl = dim_p(k - 2)
    rows, cols, vals = [], [], []

    def put(Kr, Kc, block):
        r = Kr * nl + np.arange(nl)
        c = Kc * nk + np.arange(nk)
        rows.append(np.repeat(r, nk))
        cols.append(np.tile(c, nl))
        vals.append(block.ravel())

    for K, elem in enumerate(disc.elements):
        w = elem.weights
        if form == "definition":
            put(K, K, (elem.lap[:nl] * w) @ elem.phi.T)
        else:
            put(K, K, (elem.phi[:nl] * w) @ elem.lap.T)

    for S in range(mesh.n_faces):
        Kp, Km = mesh.face_cells[S]
        tp = disc.elements[Kp].trace(S)
        wf = tp.weights
        if Km < 0:
            if form == "ibp":
                # -( [grad v].nu {phi} - [v] {grad phi}.nu ) with one-sided traces
                put(Kp, Kp, -((tp.vals[:nl] * wf) @ tp.dn.T - (tp.dn[:nl] * wf) @ tp.vals.T))
            continue
        tm = disc.elements[Km].trace(S)
        sides = ((Kp, tp, 1.0), (Km, tm, -1.0))
        for Kc, tc, sc in sides:
            for Kd, td, sd in sides:
                blk = (tc.vals[:nl] * wf) @ td.dn.T - (tc.dn[:nl] * wf) @ td.vals.T
                if form == "definition":
                    put(Kc, Kd, 0.5 * sc * blk)
                else:
                    put(Kc, Kd, -0.5 * sd * blk)
    n = disc.n_cells
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n * nl, n * nk)
    )


def dg_discrete_laplacian(disc, field_, K=None, form="definition", operator=None):
    """Delta_h of a DG field; all cells as (n_cells, dim P_{k-2}) or one cell if ``K`` is given."""
    _check_kind(field_, "dg")
    L = operator if operator is not None else dg_laplacian_operator(disc, form)
    out = (L @ field_.cell.ravel()).reshape(disc.n_cells, -1)
    return out if K is None else out[K]

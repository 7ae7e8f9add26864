"""Global degrees of freedom, assembly of a_h and F_h, and global form evaluations."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import dim_p
from .errors import InvalidDegreeError, InvalidParameterError
from .localops import (
    Discretization,
    HybridField,
    dg_face_stabilization,
    dg_face_traces,
    dg_laplacian_operator,
    field_kind,
    hho_reconstruction_map,
    normal_degree,
    stabilization_matrix,
    wg_laplacian_map,
)

__all__ = [
    "METHODS",
    "MethodConfig",
    "DofMap",
    "AssembledSystem",
    "CoercivityWarning",
    "default_sigma",
    "build_dofmap",
    "assemble",
    "assemble_rhs",
    "eval_ah",
    "eval_bh",
    "stab_form",
    "stab_seminorm",
    "is_positive_definite",
    "write_matrix_market",
]

METHODS = ("wg", "sip", "nip", "hho")


class CoercivityWarning(UserWarning):
    pass


def default_sigma(k):
    """SIP/NIP penalty default: 20 for k=2, 40 for k=3, growing linearly beyond."""
    return 20.0 * (k - 1)


@dataclass(frozen=True)
class MethodConfig:
    """Discretization choice: method in {wg, sip, nip, hho}, degree k, DG penalty sigma."""

    method: str
    k: int
    sigma: float | None = None

    def __post_init__(self):
        method = self.method.lower()
        if method not in METHODS:
            raise InvalidParameterError(f"unknown method {self.method!r}; expected one of {METHODS}")
        object.__setattr__(self, "method", method)
        if self.k < 2:
            raise InvalidDegreeError(f"degree k must be >= 2, got {self.k}")
        if self.sigma is not None and not self.sigma > 0:
            raise InvalidParameterError(f"penalty sigma must be positive, got {self.sigma}")

    @property
    def kind(self):
        return field_kind(self.method)

    @property
    def theta(self):
        return {"sip": 1.0, "nip": -1.0}.get(self.method)

    @property
    def penalty(self):
        if self.kind != "dg":
            return None
        return float(self.sigma) if self.sigma is not None else default_sigma(self.k)

    @property
    def symmetric(self):
        return self.method != "nip"


@dataclass(frozen=True)
class DofMap:
    """Contiguous numbering: all cell blocks first, then one block per interior face.

    A face block is [value (k+1) | normal (m+1)].  Boundary faces own no DOFs
    (``face_offset == -1``).
    """

    kind: str
    k: int
    n_cells: int
    cell_dim: int
    value_dim: int
    normal_dim: int
    face_offset: np.ndarray
    ndof: int

    @property
    def face_dim(self):
        return self.value_dim + self.normal_dim

    @property
    def n_cell_dofs(self):
        return self.n_cells * self.cell_dim

    def cell_dofs(self, K):
        return K * self.cell_dim + np.arange(self.cell_dim)

    def face_dofs(self, S):
        off = self.face_offset[S]
        if off < 0:
            return np.full(self.face_dim, -1)
        return off + np.arange(self.face_dim)

    def local_dofs(self, mesh, K):
        """Global indices of the local vector of ``K``; -1 marks boundary-face entries."""
        parts = [self.cell_dofs(K)]
        if self.kind != "dg":
            for S in mesh.cell_faces[K]:
                parts.append(self.face_dofs(S))
        return np.concatenate(parts)

    def to_vector(self, f):
        if f.kind != self.kind or f.k != self.k:
            raise InvalidParameterError("field does not match the DOF map")
        x = np.zeros(self.ndof)
        x[: self.n_cell_dofs] = f.cell.ravel()
        if self.kind != "dg":
            interior = self.face_offset >= 0
            blocks = np.hstack([f.face_value[interior], f.face_normal[interior]])
            x[self.n_cell_dofs :] = blocks.ravel()
        return x

    def to_field(self, x):
        x = np.asarray(x, dtype=float)
        cell = x[: self.n_cell_dofs].reshape(self.n_cells, self.cell_dim).copy()
        if self.kind == "dg":
            return HybridField("dg", self.k, cell)
        nf = len(self.face_offset)
        interior = self.face_offset >= 0
        blocks = x[self.n_cell_dofs :].reshape(-1, self.face_dim)
        fv = np.zeros((nf, self.value_dim))
        fn = np.zeros((nf, self.normal_dim))
        fv[interior] = blocks[:, : self.value_dim]
        fn[interior] = blocks[:, self.value_dim :]
        return HybridField(self.kind, self.k, cell, fv, fn)


def build_dofmap(mesh, method, k):
    if k < 2:
        raise InvalidDegreeError(f"degree k must be >= 2, got {k}")
    kind = field_kind(method)
    nk = dim_p(k)
    offset = np.full(mesh.n_faces, -1, dtype=int)
    ncd = mesh.n_cells * nk
    if kind == "dg":
        return DofMap(kind, k, mesh.n_cells, nk, 0, 0, offset, ncd)
    vd = k + 1
    nd = normal_degree(kind, k) + 1
    interior = mesh.interior_faces
    offset[interior] = ncd + np.arange(len(interior)) * (vd + nd)
    return DofMap(kind, k, mesh.n_cells, nk, vd, nd, offset, ncd + len(interior) * (vd + nd))


@dataclass
class AssembledSystem:
    """Sparse CSR matrix with A[i, j] = a_h(phi_j, phi_i), load vector and DOF map."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    config: MethodConfig
    disc: Discretization = field(repr=False)
    coercive: bool | None = None

    @property
    def ndof(self):
        return self.dofmap.ndof


class _Triplets:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, idx, block):
        keep = idx >= 0
        if not keep.all():
            idx_k = idx[keep]
            block = block[np.ix_(keep, keep)]
        else:
            idx_k = idx
        n = len(idx_k)
        self.rows.append(np.repeat(idx_k, n))
        self.cols.append(np.tile(idx_k, n))
        self.vals.append(block.ravel())

    def tocsr(self, n):
        A = sp.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))), shape=(n, n)
        )
        A.sum_duplicates()
        return A.tocsr()


def _local_matrix(disc, K, config):
    if config.kind == "wg":
        B = wg_laplacian_map(disc, K)
        return B.T @ B + stabilization_matrix(disc, K, "wg")
    R = hho_reconstruction_map(disc, K)
    A = disc.elements[K].hessian_gram()
    return R.T @ A @ R + stabilization_matrix(disc, K, "hho")


def _dg_face_matrix(disc, S, theta, sigma):
    cells, w, h, J0, J1, A2, A3 = dg_face_traces(disc, S)
    M = (
        theta * (A3.T * w) @ J0
        + (J0.T * w) @ A3
        - theta * (A2.T * w) @ J1
        - (J1.T * w) @ A2
        + sigma * (h**-3 * (J0.T * w) @ J0 + h**-1 * (J1.T * w) @ J1)
    )
    return cells, M


def _dg_matrix(disc, theta, sigma):
    nk = dim_p(disc.k)
    n = disc.n_cells * nk
    rows, cols, vals = [], [], []

    def add(r_idx, c_idx, block):
        rows.append(np.repeat(r_idx, len(c_idx)))
        cols.append(np.tile(c_idx, len(r_idx)))
        vals.append(block.ravel())

    for K, e in enumerate(disc.elements):
        idx = K * nk + np.arange(nk)
        add(idx, idx, (e.lap * e.weights) @ e.lap.T)
    for S in range(disc.mesh.n_faces):
        cells, M = _dg_face_matrix(disc, S, theta, sigma)
        idx = np.concatenate([c * nk + np.arange(nk) for c in cells])
        add(idx, idx, M)
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    A.sum_duplicates()
    return A.tocsr()


def assemble(mesh_or_disc, config, f=None, probe=True):
    """Assemble a_h (and F_h if the load ``f`` is given) for ``config``.

    ``mesh_or_disc`` is a :class:`PolyMesh` or a :class:`Discretization` of
    degree ``config.k``.  For SIP a Cholesky probe checks coercivity and
    emits :class:`CoercivityWarning` with advice if it fails.
    """
    if not isinstance(config, MethodConfig):
        raise InvalidParameterError("config must be a MethodConfig")
    disc = _as_disc(mesh_or_disc, config.k)
    mesh = disc.mesh
    dm = build_dofmap(mesh, config.method, config.k)
    if config.kind == "dg":
        A = _dg_matrix(disc, config.theta, config.penalty)
    else:
        trip = _Triplets()
        for K in range(mesh.n_cells):
            trip.add(dm.local_dofs(mesh, K), _local_matrix(disc, K, config))
        A = trip.tocsr(dm.ndof)
    rhs = assemble_rhs(disc, config.method, f) if f is not None else np.zeros(dm.ndof)
    system = AssembledSystem(A, rhs, dm, config, disc)
    if probe and config.method == "sip":
        system.coercive = is_positive_definite(A)
        if not system.coercive:
            warnings.warn(
                f"SIP matrix with sigma={config.penalty:g} is not positive definite; "
                "increase the penalty parameter sigma",
                CoercivityWarning,
                stacklevel=2,
            )
    return system


def _as_disc(mesh_or_disc, k):
    if isinstance(mesh_or_disc, Discretization):
        if mesh_or_disc.k != k:
            raise InvalidParameterError(f"discretization has degree {mesh_or_disc.k}, config needs {k}")
        return mesh_or_disc
    return Discretization(mesh_or_disc, k)


def assemble_rhs(mesh_or_disc, method, f, k=None):
    """Load vector F_h(phi_i) = (f, phi_i)_K on cell DOFs, zero on face DOFs.

    ``f`` maps (n, 2) points to values (a callable or an object with ``load``).
    """
    if k is None:
        if not isinstance(mesh_or_disc, Discretization):
            raise InvalidParameterError("pass k when assembling from a mesh")
        k = mesh_or_disc.k
    disc = _as_disc(mesh_or_disc, k)
    fn = f.load if hasattr(f, "load") else f
    dm = build_dofmap(disc.mesh, method, disc.k)
    b = np.zeros(dm.ndof)
    nk = dm.cell_dim
    for K, e in enumerate(disc.elements):
        vals = np.asarray(fn(e.rule.points), dtype=float)
        b[K * nk : (K + 1) * nk] = e.phi @ (e.weights * vals)
    return b


# --------------------------------------------------------------------------- global form evaluations


def eval_ah(system, u, v):
    """a_h(u, v) = v^T A u for fields or coefficient vectors."""
    dm = system.dofmap
    x = dm.to_vector(u) if isinstance(u, HybridField) else np.asarray(u)
    y = dm.to_vector(v) if isinstance(v, HybridField) else np.asarray(v)
    return float(y @ (system.matrix @ x))


def eval_bh(disc, u, v, theta, operator=None):
    """DG remainder b_h(u, v) over all faces.

    a_h(u, v) = (Delta_h u, Delta_h v) + b_h(u, v) + sigma s_h(u, v).
    """
    for w in (u, v):
        if not isinstance(w, HybridField) or w.kind != "dg":
            raise InvalidParameterError("b_h is defined for DG fields only")
    L = operator if operator is not None else dg_laplacian_operator(disc)
    nl = dim_p(disc.k - 2)
    dh_v = (L @ v.cell.ravel()).reshape(disc.n_cells, nl)
    mesh = disc.mesh
    total = 0.0
    for S in range(mesh.n_faces):
        cells, w, h, J0, J1, A2, A3 = dg_face_traces(disc, S)
        uu = np.concatenate([u.cell[c] for c in cells])
        vv = np.concatenate([v.cell[c] for c in cells])
        ju, jgu = J0 @ uu, J1 @ uu
        avg = 1.0 if len(cells) == 1 else 0.5
        tr = [disc.elements[c].trace(S) for c in cells]
        dh = avg * sum(t.vals[:nl].T @ dh_v[c] for t, c in zip(tr, cells))
        dh_dn = avg * sum(t.dn[:nl].T @ dh_v[c] for t, c in zip(tr, cells))
        integrand = (
            theta * ju * (A3 @ vv)
            - ju * dh_dn
            - theta * (A2 @ vv) * jgu
            + dh * jgu
        )
        total += float(w @ integrand)
    return total


def stab_form(disc, method, u, v):
    """s_h(u, v): cell-wise face sums for WG/HHO, one pass over faces for DG."""
    kind = field_kind(method)
    if u.kind != kind or v.kind != kind:
        raise InvalidParameterError("field kind does not match the method")
    total = 0.0
    if kind == "dg":
        for S in range(disc.mesh.n_faces):
            cells, M = dg_face_stabilization(disc, S)
            uu = np.concatenate([u.cell[c] for c in cells])
            vv = np.concatenate([v.cell[c] for c in cells])
            total += vv @ M @ uu
        return float(total)
    for K in range(disc.n_cells):
        S = stabilization_matrix(disc, K, kind)
        total += v.local(disc, K) @ S @ u.local(disc, K)
    return float(total)


def stab_seminorm(disc, method, u):
    """|u|_s = sqrt(s_h(u, u))."""
    return float(np.sqrt(max(stab_form(disc, method, u, u), 0.0)))


# --------------------------------------------------------------------------- diagnostics


def is_positive_definite(A, dense_limit=4000):
    """Cholesky attempt on the symmetric part of ``A``.

    Above ``dense_limit`` unknowns a sparse LU with symmetric (diagonal)
    pivoting is used; the symmetric part is positive definite iff all
    pivots are positive.
    """
    A = sp.csr_matrix(A)
    Asym = 0.5 * (A + A.T)
    n = A.shape[0]
    if n <= dense_limit:
        try:
            scipy.linalg.cholesky(Asym.toarray(), lower=True)
            return True
        except np.linalg.LinAlgError:
            return False
    d = Asym.diagonal()
    if (d <= 0).any():
        return False
    s = 1.0 / np.sqrt(d)
    D = sp.diags(s)
    M = (D @ Asym @ D).tocsc()
    try:
        lu = spla.splu(M, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    except RuntimeError:
        return False
    return bool((lu.U.diagonal() > 0).all())


def write_matrix_market(system, path):
    """Dump the system matrix in Matrix Market coordinate format."""
    scipy.io.mmwrite(path, system.matrix, comment=f"{system.config.method} k={system.config.k}")

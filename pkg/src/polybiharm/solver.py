"""Linear solves: Jacobi-preconditioned Krylov methods with direct fallbacks, and static condensation."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidParameterError, SolverFailure

__all__ = ["SolveReport", "solve", "solve_condensed", "pcg", "DENSE_LIMIT"]

DENSE_LIMIT = 3000


@dataclass
class SolveReport:
    iterations: int
    residual: float
    method: str
    wall_time: float
    converged: bool = True
    note: str = ""


def _rel_residual(A, x, b):
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(A @ x - b) / nb) if nb > 0 else float(np.linalg.norm(A @ x))


def pcg(A, b, tol=1e-10, maxiter=None, x0=None):
    """Conjugate gradients with Jacobi preconditioning.

    Returns (x, iterations, relative residual, converged).  The stopping test
    uses the true residual norm relative to ||b||.
    """
    n = A.shape[0]
    maxiter = maxiter or min(20 * n, 50000)
    d = A.diagonal()
    if (d <= 0).any():
        return np.zeros(n), 0, np.inf, False
    dinv = 1.0 / d
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    nb = np.linalg.norm(b)
    z = dinv * r
    p = z.copy()
    rz = r @ z
    stalls = 0
    for it in range(1, maxiter + 1):
        q = A @ p
        pq = p @ q
        if pq <= 0:
            return x, it, np.linalg.norm(r) / nb, False
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        if np.linalg.norm(r) <= tol * nb:
            # guard against drift of the recursive residual
            r = b - A @ x
            if np.linalg.norm(r) <= tol * nb:
                return x, it, np.linalg.norm(r) / nb, True
            stalls += 1
            if stalls > 3:
                # attainable accuracy reached: rounding keeps the true residual above tol
                return x, it, np.linalg.norm(r) / nb, False
            # restart from the true residual
            z = dinv * r
            p = z.copy()
            rz = r @ z
            continue
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxiter, np.linalg.norm(b - A @ x) / nb, False


def _refine(A, b, x, solve_fn, tol, steps=3):
    if not np.all(np.isfinite(x)):
        raise SolverFailure("direct factorization produced non-finite values (singular matrix?)")
    for _ in range(steps):
        if _rel_residual(A, x, b) <= tol:
            break
        x = x + solve_fn(b - A @ x)
    return x


def _dense(A, b, symmetric, tol):
    M = A.toarray()
    if symmetric:
        try:
            fac = scipy.linalg.cho_factor(M)
            fn = lambda r: scipy.linalg.cho_solve(fac, r)  # noqa: E731
            return _refine(A, b, fn(b), fn, tol), "direct-cholesky"
        except np.linalg.LinAlgError:
            pass
    with warnings.catch_warnings():
        # exact singularity is reported through SolverFailure below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        fac = scipy.linalg.lu_factor(M)
    fn = lambda r: scipy.linalg.lu_solve(fac, r)  # noqa: E731
    return _refine(A, b, fn(b), fn, tol), "direct-lu"


def _sparse_lu(A, b, tol):
    try:
        lu = spla.splu(sp.csc_matrix(A))
    except RuntimeError as exc:
        raise SolverFailure(f"sparse LU failed: {exc}") from exc
    return _refine(A, b, lu.solve(b), lu.solve, tol), "sparse-lu"


def _bicgstab(A, b, tol, maxiter):
    d = A.diagonal().copy()
    d[d == 0] = 1.0
    M = spla.LinearOperator(A.shape, matvec=lambda r: r / d)
    count = [0]

    def cb(_):
        count[0] += 1

    x = None
    # restarts from the current iterate: the internal test uses the recursive residual
    for _ in range(4):
        x, info = spla.bicgstab(A, b, x0=x, rtol=tol, atol=0.0, maxiter=maxiter, M=M, callback=cb)
        if info < 0 or _rel_residual(A, x, b) <= tol:
            break
    return x, count[0], info == 0


def solve(system, tol=1e-10, method="auto", maxiter=None):
    """Solve A x = b of an :class:`AssembledSystem` (or a bare (A, b) pair).

    ``method``: ``auto`` (dense direct below 3000 unknowns, otherwise PCG for
    symmetric systems and BiCGStab for NIP, each falling back to a sparse
    LU on failure), ``direct`` or ``iterative``.  Raises :class:`SolverFailure`
    if the final relative residual exceeds ``tol``.
    """
    if tol <= 0:
        raise InvalidParameterError("tolerance must be positive")
    if method not in ("auto", "direct", "iterative"):
        raise InvalidParameterError(f"unknown solver method {method!r}")
    if isinstance(system, tuple):
        A, b = system
        symmetric = abs(A - A.T).max() <= 1e-12 * abs(A).max() if A.nnz else True
    else:
        A, b = system.matrix, system.rhs
        symmetric = system.config.symmetric
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    t0 = time.perf_counter()
    if not np.any(b):
        return np.zeros(n), SolveReport(0, 0.0, "trivial", time.perf_counter() - t0)

    iters, note = 0, ""
    if method == "direct" or (method == "auto" and n < DENSE_LIMIT):
        x, used = _dense(A, b, symmetric, tol) if n < DENSE_LIMIT else _sparse_lu(A, b, tol)
    else:
        if symmetric:
            x, iters, _, ok = pcg(A, b, tol, maxiter)
            used = "iterative-pcg"
        else:
            x, iters, ok = _bicgstab(A, b, tol, maxiter or 20 * n)
            used = "iterative-bicgstab"
        ok = ok and _rel_residual(A, x, b) <= tol
        if not ok:
            if method == "iterative":
                res = _rel_residual(A, x, b)
                raise SolverFailure(
                    f"{used} did not reach tolerance {tol:g} (residual {res:.2e})",
                    SolveReport(iters, res, used, time.perf_counter() - t0, False),
                )
            note = f"{used} stalled after {iters} iterations"
            x, used = _sparse_lu(A, b, tol)
    res = _rel_residual(A, x, b)
    report = SolveReport(iters, res, used, time.perf_counter() - t0, res <= tol, note)
    if not np.isfinite(res) or res > tol:
        report.converged = False
        raise SolverFailure(f"{used} residual {res:.2e} exceeds tolerance {tol:g}", report)
    return x, report


def solve_condensed(system, tol=1e-10, method="auto"):
    """Solve a WG/HHO system after eliminating the cell unknowns cell by cell.

    The cell block is block diagonal, so its inverse is formed per cell; the
    Schur complement on the face unknowns is solved with :func:`solve` and
    the cell unknowns are recovered afterwards.
    """
    dm = system.dofmap
    if dm.kind == "dg":
        raise InvalidParameterError("static condensation applies to WG and HHO only")
    t0 = time.perf_counter()
    A = system.matrix.tocsr()
    b = system.rhs
    nc = dm.n_cell_dofs
    m = dm.cell_dim
    Acc = A[:nc, :nc]
    Acf = A[:nc, nc:]
    Afc = A[nc:, :nc]
    Aff = A[nc:, nc:]
    blocks = np.stack([Acc[i * m : (i + 1) * m, i * m : (i + 1) * m].toarray() for i in range(dm.n_cells)])
    inv = sp.block_diag(list(np.linalg.inv(blocks)), format="csr")
    schur = (Aff - Afc @ inv @ Acf).tocsr()
    schur = 0.5 * (schur + schur.T)
    g = b[nc:] - Afc @ (inv @ b[:nc])
    xf, rep = solve((schur, g), tol=tol, method=method)
    xc = inv @ (b[:nc] - Acf @ xf)
    x = np.concatenate([xc, xf])
    res = _rel_residual(A, x, b)
    return x, SolveReport(rep.iterations, res, f"condensed/{rep.method}", time.perf_counter() - t0, rep.converged, rep.note)

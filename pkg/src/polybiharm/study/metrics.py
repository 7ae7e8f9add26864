"""Error quantities of a discrete solution against a manufactured solution."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..assembly import stab_seminorm
from ..basis import cell_quadrature
from ..errors import InvalidParameterError
from ..localops import field_kind, galerkin_projection

__all__ = ["ErrorReport", "compute_errors", "compute_eoc", "error_quad_degree"]


def error_quad_degree(k):
    return 2 * k + 8


@dataclass
class ErrorReport:
    """One row of a convergence table (all norms over the whole domain)."""

    method: str
    k: int
    mesh: str
    n: int
    h_max: float
    ndof: int
    energy: float
    stab: float
    best: float
    osc: float
    l2: float
    h1: float
    quasi_opt: float = field(init=False)
    stab_eff: float = field(init=False)
    eoc_energy: float | None = None
    eoc_l2: float | None = None
    eoc_h1: float | None = None
    solver: str = ""
    iterations: int = 0
    residual: float = 0.0
    status: str = "ok"

    def __post_init__(self):
        denom = self.best + self.osc
        self.quasi_opt = (self.energy + self.stab) / denom if denom > 0 else float("nan")
        self.stab_eff = self.stab / denom if denom > 0 else float("nan")

    def as_dict(self):
        return asdict(self)


def _cell_tables(elem, rule):
    b = elem.basis
    p = rule.points
    return {
        "phi": b.partial(p),
        "gx": b.partial(p, 1, 0),
        "gy": b.partial(p, 0, 1),
        "xx": b.partial(p, 2, 0),
        "xy": b.partial(p, 1, 1),
        "yy": b.partial(p, 0, 2),
    }


def _hess_sq(H, c, t):
    rxx = H[:, 0, 0] - c @ t["xx"]
    rxy = H[:, 0, 1] - c @ t["xy"]
    ryy = H[:, 1, 1] - c @ t["yy"]
    return rxx**2 + 2 * rxy**2 + ryy**2


def compute_errors(disc, method, u_h, case, quad_degree=None, mesh_name="", n=0, ndof=0):
    """Energy, stabilization, best-approximation, oscillation, L2 and broken H1 errors.

    ``u_h`` is a field of ``method``; its cell part (the whole field for DG)
    is compared with ``case``.  Integrals use a rule of degree 2k+8 unless
    ``quad_degree`` is given.
    """
    kind = field_kind(method)
    if u_h.kind != kind:
        raise InvalidParameterError("field kind does not match the method")
    mesh = disc.mesh
    qd = quad_degree or error_quad_degree(disc.k)
    e_en = e_best = e_osc = e_l2 = e_h1 = 0.0
    for K, elem in enumerate(disc.elements):
        rule = cell_quadrature(mesh, K, qd)
        w = rule.weights
        t = _cell_tables(elem, rule)
        pts = rule.points
        u = case.value(pts)
        g = case.gradient(pts)
        H = case.hessian(pts)
        f = case.load(pts)
        c = u_h.cell[K]
        e_en += w @ _hess_sq(H, c, t)
        e_l2 += w @ (u - c @ t["phi"]) ** 2
        e_h1 += w @ ((g[:, 0] - c @ t["gx"]) ** 2 + (g[:, 1] - c @ t["gy"]) ** 2)
        cg = galerkin_projection(disc, K, case, rule=rule)
        e_best += w @ _hess_sq(H, cg, t)
        resid = f - (t["phi"] @ (w * f)) @ t["phi"]
        e_osc += elem.h**4 * (w @ resid**2)
    return ErrorReport(
        method=method,
        k=disc.k,
        mesh=mesh_name,
        n=n,
        h_max=float(mesh.h_max),
        ndof=ndof,
        energy=float(np.sqrt(e_en)),
        stab=stab_seminorm(disc, method, u_h),
        best=float(np.sqrt(e_best)),
        osc=float(np.sqrt(e_osc)),
        l2=float(np.sqrt(e_l2)),
        h1=float(np.sqrt(e_h1)),
    )


def compute_eoc(errors, meshsizes):
    """Pairwise rates log(e_i / e_{i+1}) / log(h_i / h_{i+1})."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(meshsizes, dtype=float)
    if e.shape != h.shape or e.ndim != 1 or len(e) < 2:
        raise InvalidParameterError("errors and mesh sizes must be equal-length sequences of length >= 2")
    if (e <= 0).any() or (h <= 0).any() or not np.all(np.isfinite(e)):
        raise InvalidParameterError("errors and mesh sizes must be positive")
    if np.any(h[:-1] == h[1:]):
        raise InvalidParameterError("consecutive mesh sizes must differ")
    return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))

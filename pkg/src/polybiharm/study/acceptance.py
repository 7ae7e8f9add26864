"""The nine acceptance properties, each returning a pass/fail record with details.

``study check`` and the test suite both call :func:`run_acceptance`.
Convergence runs shared by several properties are cached per process.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from ..assembly import MethodConfig, assemble, eval_ah, eval_bh, stab_form
from ..basis import dim_p
from ..localops import (
    Discretization,
    HybridField,
    dg_discrete_laplacian,
    dg_laplacian_operator,
    hho_reconstruction,
    interpolate,
    wg_discrete_laplacian,
)
from ..mesh import generate_mesh
from ..solver import solve, solve_condensed
from . import oracles
from .cases import PolynomialFunction, manufactured_case
from .harness import StudyConfig, run_study, solve_case
from .metrics import compute_errors
from .norms import sample_norm_ratios

__all__ = ["CriterionResult", "CRITERIA", "run_acceptance", "check"]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: list = field(default_factory=list)
    seconds: float = 0.0

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.title} ({self.seconds:.1f}s)"


def _rel(a, b):
    scale = max(abs(a), abs(b), 1e-300)
    return abs(a - b) / scale


# --------------------------------------------------------------------------- 1


def operator_exactness(seed=0, samples=10):
    """Interior-cell polynomial consistency of Delta_h (WG, DG) and R_h (HHO)."""
    rng = np.random.default_rng(seed)
    worst = {}
    for kind in ("cartesian", "hexagonal"):
        mesh = generate_mesh(kind, 4)
        interior = [K for K in range(mesh.n_cells) if mesh.is_interior_cell(K)]
        for k in (2, 3):
            disc = Discretization(mesh, k)
            nl = dim_p(k - 2)
            L = dg_laplacian_operator(disc)
            for _ in range(samples):
                p = PolynomialFunction.random(k, rng)
                iw, idg, ih = interpolate(disc, "wg", p), interpolate(disc, "dg", p), interpolate(disc, "hho", p)
                dg_lap = dg_discrete_laplacian(disc, idg, operator=L)
                for K in interior:
                    e = disc.elements[K]
                    w = e.weights
                    lap_ref = e.phi[:nl] @ (w * p.laplacian(e.rule.points))
                    val_ref = e.phi @ (w * p.value(e.rule.points))
                    errs = {
                        "wg": wg_discrete_laplacian(disc, K, iw.local(disc, K)) - lap_ref,
                        "dg": dg_lap[K] - lap_ref,
                        "hho": hho_reconstruction(disc, K, ih.local(disc, K)) - val_ref,
                    }
                    refs = {"wg": lap_ref, "dg": lap_ref, "hho": val_ref}
                    for m, err in errs.items():
                        rel = np.linalg.norm(err) / max(np.linalg.norm(refs[m]), 1e-300)
                        key = (kind, k, m)
                        worst[key] = max(worst.get(key, 0.0), rel)
    details = [f"{kind} n=4 k={k} {m}: max rel coeff error {v:.1e}" for (kind, k, m), v in sorted(worst.items())]
    return all(v <= 1e-9 for v in worst.values()), details


# --------------------------------------------------------------------------- 2


def oracle_equivalence(seed=0, pairs=20):
    """DG identity a_h = (Delta_h, Delta_h) + b_h + sigma s_h; WG/HHO matrix forms against the slow path."""
    rng = np.random.default_rng(seed)
    mesh = generate_mesh("cartesian", 2)
    details = []
    ok = True
    for k in (2, 3):
        disc = Discretization(mesh, k)
        L = dg_laplacian_operator(disc)
        for method, theta in (("sip", 1.0), ("nip", -1.0)):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                system = assemble(disc, MethodConfig(method, k))
            sigma = system.config.penalty
            worst = 0.0
            for _ in range(pairs):
                u = HybridField.random(disc, "dg", rng)
                v = HybridField.random(disc, "dg", rng)
                lhs = eval_ah(system, u, v)
                lu = L @ u.cell.ravel()
                lv = L @ v.cell.ravel()
                rhs = lv @ lu + eval_bh(disc, u, v, theta, operator=L) + sigma * stab_form(disc, "dg", u, v)
                worst = max(worst, _rel(lhs, rhs))
            ok &= worst <= 1e-10
            details.append(f"{method} k={k}: a_h vs Delta_h/b_h/s_h rewriting, max rel diff {worst:.1e}")
        for method, form in (("wg", oracles.wg_form), ("hho", oracles.hho_form)):
            system = assemble(disc, MethodConfig(method, k))
            worst = 0.0
            for _ in range(pairs):
                u = HybridField.random(disc, method, rng)
                v = HybridField.random(disc, method, rng)
                worst = max(worst, _rel(eval_ah(system, u, v), form(disc, u, v)))
            ok &= worst <= 1e-10
            details.append(f"{method} k={k}: u^T A v vs slow-path quadrature, max rel diff {worst:.1e}")
    return ok, details


# --------------------------------------------------------------------------- 3


def norm_equivalence(seed=0, samples=100):
    """Sampled norm-equivalence constants on cartesian n = 2, 4, 8."""
    names = ("stab gap / |v|_s", "||v||_h / alt", "alt / ||v||_h")
    ok = True
    details = []
    for method in ("wg", "sip", "hho"):
        label = "dg" if method == "sip" else method
        maxima = []
        for n in (2, 4, 8):
            disc = Discretization(generate_mesh("cartesian", n), 2)
            maxima.append(sample_norm_ratios(disc, method, samples, seed).max(axis=0))
        maxima = np.array(maxima)
        for j, name in enumerate(names):
            col = maxima[:, j]
            growth = max(col[1:] / col[:-1])
            good = col.max() <= 100 and growth <= 1.2
            ok &= bool(good)
            details.append(
                f"{label} {name}: max per level {np.array2string(col, precision=3)}, worst growth {growth:.2f}"
            )
    return ok, details


# --------------------------------------------------------------------------- 4-6


CONVERGENCE_FAMILIES = ("cartesian", "perturbed-quad")


@lru_cache(maxsize=None)
def convergence_rows(mesh):
    cfg = StudyConfig(
        methods=["wg", "sip", "nip", "hho"],
        degrees=[2, 3],
        mesh=mesh,
        levels=[4, 8, 16, 32],
        degree_levels={3: [4, 8, 16]},
    )
    return tuple(run_study(cfg))


def _sequences(mesh):
    out = {}
    for r in convergence_rows(mesh):
        out.setdefault((r.method, r.k), []).append(r)
    return out


def energy_convergence():
    ok = True
    details = []
    for mesh in CONVERGENCE_FAMILIES:
        for (method, k), seq in _sequences(mesh).items():
            bound = k - 1 - 0.25 if k == 2 else 1.7
            rate = seq[-1].eoc_energy
            good = all(r.status != "solver-failure" for r in seq) and rate is not None and rate >= bound
            ok &= good
            eocs = ", ".join("-" if r.eoc_energy is None else f"{r.eoc_energy:.2f}" for r in seq)
            details.append(f"{mesh} {method} k={k}: energy EOC [{eocs}] last >= {bound:.2f}: {good}")
    return ok, details


def _ratio_check(attr, label, growth_rule):
    ok = True
    details = []
    for mesh in CONVERGENCE_FAMILIES:
        for (method, k), seq in _sequences(mesh).items():
            vals = np.array([getattr(r, attr) for r in seq])
            growth = vals[1:] / vals[:-1]
            good = bool(vals.max() <= 50 and growth_rule(growth))
            ok &= good
            details.append(
                f"{mesh} {method} k={k}: {label} {np.array2string(vals, precision=2)}, "
                f"growth {np.array2string(growth, precision=2)}: {good}"
            )
    return ok, details


def quasi_optimality():
    """(energy + |u_h|_s) / (best + osc) <= 50 at every level, growth <= 20% between consecutive levels."""
    return _ratio_check("quasi_opt", "ratio", lambda g: bool(np.all(g <= 1.2)))


def stabilization_efficiency():
    """|u_h|_s / (best + osc) <= 50 at every level; flat trend read on the last pair of levels."""
    return _ratio_check("stab_eff", "ratio", lambda g: bool(g[-1] <= 1.2))


# --------------------------------------------------------------------------- 7


@lru_cache(maxsize=None)
def lower_order_rows():
    # the L2 rate of SIP is still pre-asymptotic up to n = 32, hence the extra level; at n = 64 a
    # 1e-10 relative residual is below the rounding floor of the DG systems, so 1e-8 is used
    cfg = StudyConfig(
        methods=["wg", "sip", "nip", "hho"], degrees=[2], mesh="cartesian", levels=[16, 32, 64], tolerance=1e-8
    )
    return tuple(run_study(cfg))


def lower_order_rates():
    ok = True
    details = []
    for r in convergence_rows("cartesian"):
        if r.k == 2 and r.n == 32:
            details.append(f"(n=16->32 for reference) {r.method}: L2 EOC {r.eoc_l2:.2f}, H1 EOC {r.eoc_h1:.2f}")
    for r in lower_order_rows():
        if r.n != 64:
            continue
        good_h1 = r.eoc_h1 is not None and r.eoc_h1 >= 1.3
        if r.method == "nip":
            good_l2 = True
            note = "reported only"
        else:
            good_l2 = r.eoc_l2 is not None and r.eoc_l2 >= 1.8
            note = f">= 1.8: {good_l2}"
        ok &= good_h1 and good_l2
        details.append(
            f"cartesian n=32->64 {r.method}: L2 EOC {r.eoc_l2:.2f} ({note}), H1 EOC {r.eoc_h1:.2f} (>= 1.3: {good_h1})"
        )
    return ok, details


# --------------------------------------------------------------------------- 8


def structure_checks(seed=0, samples=1000):
    rng = np.random.default_rng(seed)
    ok = True
    details = []
    case = manufactured_case("sine-squared")
    for kind in ("cartesian", "perturbed-quad"):
        mesh = generate_mesh(kind, 8)
        for k in (2, 3):
            disc = Discretization(mesh, k)
            for method in ("wg", "hho", "sip"):
                A = assemble(disc, MethodConfig(method, k), probe=False).matrix
                asym = abs(A - A.T).max() / abs(A).max()
                try:
                    scipy.linalg.cholesky(A.toarray())
                    chol = True
                except np.linalg.LinAlgError:
                    chol = False
                good = asym <= 1e-12 and chol
                ok &= good
                details.append(f"{kind} n=8 k={k} {method}: asymmetry {asym:.1e}, Cholesky {'ok' if chol else 'FAILED'}")
    mesh = generate_mesh("cartesian", 4)
    disc = Discretization(mesh, 2)
    L = dg_laplacian_operator(disc)
    for sigma in (1.0, None):
        system = assemble(disc, MethodConfig("nip", 2, sigma))
        lo = np.inf
        for _ in range(samples):
            v = HybridField.random(disc, "dg", rng)
            q = eval_ah(system, v, v)
            norm = sum(c @ ((e.lap * e.weights) @ e.lap.T) @ c for c, e in zip(v.cell, disc.elements))
            norm += stab_form(disc, "dg", v, v)
            lo = min(lo, q / norm)
        good = lo > 0
        ok &= good
        label = "default" if sigma is None else f"{sigma:g}"
        details.append(f"nip sigma={label}: min v^T A v / (||Delta_pw v||^2 + |v|_s^2) over {samples} samples = {lo:.3f}")
    for method in ("wg", "hho"):
        for kind in ("cartesian", "perturbed-quad"):
            disc = Discretization(generate_mesh(kind, 8), 2)
            system = assemble(disc, MethodConfig(method, 2), case)
            x1, _ = solve(system, method="direct")
            x2, _ = solve_condensed(system)
            rel = np.linalg.norm(x1 - x2) / np.linalg.norm(x1)
            good = rel <= 1e-8
            ok &= good
            details.append(f"{kind} n=8 {method}: condensed vs full solve rel diff {rel:.1e}")
    return ok, details


# --------------------------------------------------------------------------- 9


def exact_representability():
    case = manufactured_case("polynomial-bubble")
    mesh = generate_mesh("cartesian", 2)
    disc, system, uh, rep = solve_case(mesh, "wg", 8, case)
    r = compute_errors(disc, "wg", uh, case)
    ok = r.best <= 1e-9 and r.energy <= 1e-6
    return ok, [f"wg k=8 2x2: best-approximation {r.best:.1e} (<= 1e-9), energy {r.energy:.1e} (<= 1e-6)"]


CRITERIA = {
    1: ("operator exactness", operator_exactness),
    2: ("oracle equivalence", oracle_equivalence),
    3: ("norm equivalence", norm_equivalence),
    4: ("energy convergence", energy_convergence),
    5: ("quasi-optimality", quasi_optimality),
    6: ("stabilization efficiency", stabilization_efficiency),
    7: ("lower-order rates", lower_order_rates),
    8: ("structure checks", structure_checks),
    9: ("exact representability", exact_representability),
}


def check(number):
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    passed, details = fn()
    return CriterionResult(number, title, bool(passed), list(details), time.perf_counter() - t0)


def run_acceptance(numbers=None, out=print, verbose=False):
    """Run the selected criteria (all by default) and print one line per criterion."""
    results = []
    for n in numbers or sorted(CRITERIA):
        res = check(n)
        results.append(res)
        if out:
            out(res.line())
            if verbose or not res.passed:
                for d in res.details:
                    out(f"    {d}")
    return results

"""What the discrete second-order operators do on a single polygon patch.

Run:  python3 demos/02_local_operators.py

For a cubic p the interpolant I_h p is exact in the sense that
  - the WG and DG discrete Laplacians return Delta p,
  - the HHO reconstruction returns p itself,
  - the stabilization vanishes.
This holds on cells away from the boundary, where the clamped boundary
unknowns do not interfere.  A random field instead has a nonzero
stabilization, and the norm-equivalence ratios stay O(1) under refinement.
"""

import numpy as np

from polybiharm.assembly import stab_seminorm
from polybiharm.localops import (
    Discretization,
    HybridField,
    dg_discrete_laplacian,
    hho_reconstruction,
    interpolate,
    local_stabilization,
    wg_discrete_laplacian,
)
from polybiharm.mesh import generate_mesh
from polybiharm.study.cases import PolynomialFunction
from polybiharm.study.norms import sample_norm_ratios

rng = np.random.default_rng(7)
mesh = generate_mesh("hexagonal", 4)
disc = Discretization(mesh, 3)
K = next(K for K in range(mesh.n_cells) if mesh.is_interior_cell(K))
elem = disc.elements[K]
pts = elem.rule.points[:5]
print(f"cell {K}: {len(mesh.cells[K])} edges, area {mesh.cell_area[K]:.4f}")

p = PolynomialFunction.random(3, rng)
wg = interpolate(disc, "wg", p)
hho = interpolate(disc, "hho", p)
dg = interpolate(disc, "sip", p)

lap_wg = elem.basis.evaluate(wg_discrete_laplacian(disc, K, wg.local(disc, K)), pts)
lap_dg = elem.basis.evaluate(dg_discrete_laplacian(disc, dg, K), pts)
rec = elem.basis.evaluate(hho_reconstruction(disc, K, hho.local(disc, K)), pts)
print("max |Delta_h I p - Delta p|  WG:", np.abs(lap_wg - p.laplacian(pts)).max())
print("                             DG:", np.abs(lap_dg - p.laplacian(pts)).max())
print("max |R_h I p - p|           HHO:", np.abs(rec - p(pts)).max())
print("s_K(I p, I p)   WG: %.1e   HHO: %.1e" % (
    local_stabilization(disc, "wg", K, wg, wg), local_stabilization(disc, "hho", K, hho, hho)))

# random fields: the stabilization is what the norms see beyond the broken operator
for method in ("wg", "sip", "hho"):
    v = HybridField.random(disc, method, rng)
    print(f"{method:>4}: |v|_s of a random field = {stab_seminorm(disc, method, v):.3e}")

print("\nnorm-equivalence ratios (max over 100 random fields), k=2, cartesian")
print(f"{'n':>3} {'method':>6} {'gap/|v|_s':>10} {'|v|_h/N':>9} {'N/|v|_h':>9}")
for n in (2, 4, 8):
    d = Discretization(generate_mesh("cartesian", n), 2)
    for method in ("wg", "sip", "hho"):
        r = sample_norm_ratios(d, method, samples=100, rng=rng).max(axis=0)
        print(f"{n:3d} {method:>6} {r[0]:10.3f} {r[1]:9.3f} {r[2]:9.3f}")

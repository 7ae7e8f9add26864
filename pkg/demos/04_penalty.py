"""How large must the SIP penalty be?

Run:  python3 demos/04_penalty.py

The symmetric interior penalty matrix is positive definite only for
sigma above a mesh- and degree-dependent threshold.  We bisect for that
threshold with a Cholesky probe and compare it with the default
sigma = 20 (k - 1).  On hexagonal meshes at k = 3 the default is too
small, and ``assemble`` warns.  NIP has no threshold: its consistency
terms cancel on the diagonal, so any sigma > 0 works.
"""

import warnings

from polybiharm.assembly import CoercivityWarning, MethodConfig, assemble, default_sigma, is_positive_definite
from polybiharm.localops import Discretization
from polybiharm.mesh import generate_mesh


def threshold(disc, k, lo=0.1, hi=400.0, steps=25):
    def pd(sigma):
        return is_positive_definite(assemble(disc, MethodConfig("sip", k, sigma), probe=False).matrix)

    if not pd(hi):
        return float("inf")
    for _ in range(steps):
        mid = (lo * hi) ** 0.5
        lo, hi = (lo, mid) if pd(mid) else (mid, hi)
    return hi


for kind in ("cartesian", "perturbed-quad", "hexagonal"):
    for k in (2, 3):
        disc = Discretization(generate_mesh(kind, 4), k)
        s = threshold(disc, k)
        flag = "ok" if default_sigma(k) > s else "default too small"
        print(f"{kind:>15} k={k}: minimal sigma ~ {s:6.1f}, default {default_sigma(k):4.0f}  {flag}")

disc = Discretization(generate_mesh("hexagonal", 4), 3)
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    system = assemble(disc, MethodConfig("sip", 3))
print("\nhexagonal k=3 with the default sigma: coercive =", system.coercive)
for w in caught:
    if issubclass(w.category, CoercivityWarning):
        print("warning:", w.message)

"""A convergence study for all four methods on hexagonal meshes.

Run:  python3 demos/03_convergence.py          (about a minute)

Same loop as ``study run``: manufactured sine-squared plate, levels n = 4..16,
energy error |u - u_h|_{2,pw} with its EOC, and the two ratios against the
best approximation plus data oscillation.  Expect energy EOCs near k - 1 = 1;
the DG ratios sit near 1 while WG and HHO pay a larger constant.

Three levels this coarse trip two gates.  The quasi-optimality ratio rises
from n=4 to n=8 while the data oscillation still dominates its denominator.
The HHO L2 rate (about 1.77) is still short of the asymptotic 2 at n=16.
Add ``32`` to the levels to see both settle.
"""

from polybiharm.study import StudyConfig, evaluate_gates, run_study

cfg = StudyConfig(methods=["wg", "sip", "nip", "hho"], degrees=[2], mesh="hexagonal", levels=[4, 8, 16])


def show(r):
    eoc = "   -" if r.eoc_energy is None else f"{r.eoc_energy:4.2f}"
    print(
        f"{r.method:>4} n={r.n:<3d} dofs={r.ndof:<6d} energy={r.energy:.3e} eoc={eoc} "
        f"L2={r.l2:.2e} quasi-opt={r.quasi_opt:5.2f} stab-eff={r.stab_eff:5.2f} [{r.solver}]"
    )


rows = run_study(cfg, progress=show)

print()
for g in evaluate_gates(rows, cfg):
    print(f"{g['gate']:>25} {g['method']:>4} k={g['k']}: {'pass' if g['passed'] else 'FAIL'} "
          f"(value {g['value']:.3g}, bound {g['bound']:.3g})")

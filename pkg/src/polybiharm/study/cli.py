"""Command line entry point: ``study run``, ``study mesh`` and ``study check``."""

from __future__ import annotations

import argparse
import sys

from ..errors import InvalidParameterError, MeshParseError
from ..mesh import generate_mesh, save_mesh, validate_mesh


def _fmt(v, spec=".3e"):
    return "-" if v is None else format(v, spec)


def _print_row(r):
    print(
        f"{r.method:>4} k={r.k} n={r.n:<3d} h={r.h_max:.4f} dofs={r.ndof:<6d} "
        f"energy={_fmt(r.energy)} stab={_fmt(r.stab)} best={_fmt(r.best)} "
        f"eoc={_fmt(r.eoc_energy, '.2f')} qopt={r.quasi_opt:.2f} [{r.status}]",
        flush=True,
    )


def cmd_run(args):
    from .harness import evaluate_gates, load_config, run_study, write_reports

    config = load_config(args.config)
    out = args.output or config.output or "study-report"
    rows = run_study(config, progress=_print_row)
    gates = evaluate_gates(rows, config)
    csv_path, json_path = write_reports(rows, gates, out, config)
    for g in gates:
        if not g["passed"]:
            print(f"gate failed: {g['gate']} {g['method']} k={g['k']} value={g['value']} bound={g['bound']}")
    passed = all(g["passed"] for g in gates)
    print(f"wrote {csv_path} and {json_path}; {'all gates passed' if passed else 'some gates failed'}")
    return 0 if passed else 1


def cmd_mesh(args):
    mesh = generate_mesh(args.kind, args.n, seed=args.seed)
    rep = validate_mesh(mesh)
    save_mesh(mesh, args.out)
    print(
        f"{args.kind} n={args.n}: {mesh.n_cells} cells, {mesh.n_faces} faces, h_max={mesh.h_max:.4f}, "
        f"min aspect {rep.min_aspect:.3f} -> {args.out}"
    )
    return 0


def cmd_check(args):
    from .acceptance import run_acceptance

    results = run_acceptance(args.criteria or None, verbose=args.verbose)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed: {failed}" if failed else ""))
    return 0 if not failed else 1


def build_parser():
    p = argparse.ArgumentParser(prog="study", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a convergence study from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--output", help="report path prefix (overrides the config)")
    run.set_defaults(func=cmd_run)

    mesh = sub.add_parser("mesh", help="generate a mesh and write it as JSON")
    mesh.add_argument("--kind", required=True, choices=["cartesian", "perturbed-quad", "hexagonal"])
    mesh.add_argument("--n", type=int, required=True)
    mesh.add_argument("--out", required=True)
    mesh.add_argument("--seed", type=int, default=0)
    mesh.set_defaults(func=cmd_mesh)

    check = sub.add_parser("check", help="run the acceptance suite")
    check.add_argument("--criteria", type=int, nargs="*", help="subset of criteria numbers (1-9)")
    check.add_argument("--verbose", "-v", action="store_true")
    check.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidParameterError, MeshParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

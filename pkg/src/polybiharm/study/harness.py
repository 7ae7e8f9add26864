"""Convergence studies: config parsing, the method x degree x level loop, gates and reports.

Config grammar (plain text, one ``key = value`` per line, ``#`` starts a comment,
lists are comma separated)::

    methods   = wg, sip, nip, hho
    degrees   = 2, 3
    mesh      = cartesian            # cartesian | perturbed-quad | hexagonal
    levels    = 4, 8, 16, 32         # n per level
    levels.3  = 4, 8, 16             # optional per-degree override
    case      = sine-squared         # or polynomial-bubble
    sigma     = 20                   # SIP/NIP penalty; default 20 (k-1)
    tolerance = 1e-10
    solver    = auto                 # auto | direct | iterative | condensed
    seed      = 0
    output    = results/study        # writes <output>.csv and <output>.json
    expected_rate.wg = 1             # optional override of the energy rate k-1
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from ..assembly import MethodConfig, assemble
from ..errors import InvalidParameterError, SolverFailure
from ..localops import Discretization
from ..mesh import generate_mesh
from ..solver import solve, solve_condensed
from .cases import manufactured_case
from .metrics import ErrorReport, compute_eoc, compute_errors

__all__ = ["StudyConfig", "parse_config", "load_config", "run_study", "evaluate_gates", "write_reports", "solve_case"]

RATE_SLACK = 0.25
RATIO_CAP = 50.0
RATIO_GROWTH = 1.2


@dataclass
class StudyConfig:
    methods: list = field(default_factory=lambda: ["wg", "sip", "nip", "hho"])
    degrees: list = field(default_factory=lambda: [2])
    mesh: str = "cartesian"
    levels: list = field(default_factory=lambda: [4, 8, 16])
    degree_levels: dict = field(default_factory=dict)
    case: str = "sine-squared"
    sigma: float | None = None
    tolerance: float = 1e-10
    solver: str = "auto"
    seed: int = 0
    output: str | None = None
    expected_rates: dict = field(default_factory=dict)

    def __post_init__(self):
        for m in self.methods:
            MethodConfig(m, 2)  # validates the name
        if any(k < 2 for k in self.degrees):
            raise InvalidParameterError("degrees must be >= 2")
        if self.solver not in ("auto", "direct", "iterative", "condensed"):
            raise InvalidParameterError(f"unknown solver {self.solver!r}")
        if self.tolerance <= 0:
            raise InvalidParameterError("tolerance must be positive")
        if self.sigma is not None and not self.sigma > 0:
            raise InvalidParameterError("sigma must be positive")
        manufactured_case(self.case)

    def levels_for(self, k):
        return self.degree_levels.get(k, self.levels)

    def expected_rate(self, method, k):
        return self.expected_rates.get(method, k - 1)


def _ints(v):
    return [int(x) for x in _list(v)]


def _list(v):
    return [x.strip() for x in v.split(",") if x.strip()]


def parse_config(text):
    """Parse the key-value grammar of the module docstring into a :class:`StudyConfig`."""
    kw = {"degree_levels": {}, "expected_rates": {}}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameterError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key == "methods":
                kw["methods"] = [m.lower() for m in _list(value)]
            elif key == "degrees":
                kw["degrees"] = _ints(value)
            elif key == "levels":
                kw["levels"] = _ints(value)
            elif key.startswith("levels."):
                kw["degree_levels"][int(key.split(".", 1)[1])] = _ints(value)
            elif key == "expected_rate" or key.startswith("expected_rate."):
                kw["expected_rates"][key.split(".", 1)[1].lower()] = float(value)
            elif key in ("mesh", "case", "solver", "output"):
                kw[key] = value
            elif key == "sigma":
                kw["sigma"] = None if value.lower() in ("", "default") else float(value)
            elif key == "tolerance":
                kw["tolerance"] = float(value)
            elif key == "seed":
                kw["seed"] = int(value)
            else:
                raise InvalidParameterError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, InvalidParameterError):
                raise
            raise InvalidParameterError(f"line {lineno}: bad value for {key!r}: {value!r}") from exc
    return StudyConfig(**kw)


def load_config(path):
    return parse_config(Path(path).read_text())


def solve_case(mesh, method, k, case, sigma=None, tolerance=1e-10, solver="auto", disc=None):
    """Assemble and solve one problem; returns (disc, system, field, report)."""
    disc = disc or Discretization(mesh, k)
    cfg = MethodConfig(method, k, sigma)
    system = assemble(disc, cfg, case)
    if solver == "condensed" and cfg.kind != "dg":
        x, rep = solve_condensed(system, tol=tolerance)
    else:
        x, rep = solve(system, tol=tolerance, method="auto" if solver == "condensed" else solver)
    return disc, system, system.dofmap.to_field(x), rep


def run_study(config, progress=None):
    """Run every method x degree x level and return the list of :class:`ErrorReport` rows.

    A solver failure stops that (method, degree) sequence; the failing level
    is recorded with ``status="solver-failure"``.
    """
    case = manufactured_case(config.case)
    rows = []
    meshes = {}
    for k in config.degrees:
        for method in config.methods:
            seq = []
            for n in config.levels_for(k):
                if n not in meshes:
                    meshes[n] = generate_mesh(config.mesh, n, seed=config.seed)
                mesh = meshes[n]
                try:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        disc, system, uh, rep = solve_case(
                            mesh, method, k, case, config.sigma, config.tolerance, config.solver
                        )
                except SolverFailure as exc:
                    r = exc.report
                    nan = float("nan")
                    row = ErrorReport(method, k, config.mesh, n, mesh.h_max, 0, nan, nan, nan, nan, nan, nan)
                    row.status = "solver-failure"
                    row.residual = r.residual if r else nan
                    seq.append(row)
                    break
                row = compute_errors(disc, method, uh, case, mesh_name=config.mesh, n=n, ndof=system.ndof)
                row.solver, row.iterations, row.residual = rep.method, rep.iterations, rep.residual
                if system.coercive is False:
                    row.status = "not-coercive"
                seq.append(row)
                _fill_eoc(seq[-2:])
                if progress:
                    progress(row)
            rows.extend(seq)
    return rows


def _fill_eoc(seq):
    for a, b in zip(seq, seq[1:]):
        if a.status == "solver-failure" or b.status == "solver-failure":
            continue
        for name in ("energy", "l2", "h1"):
            ea, eb = getattr(a, name), getattr(b, name)
            if ea > 0 and eb > 0:
                setattr(b, f"eoc_{name}", compute_eoc([ea, eb], [a.h_max, b.h_max])[0])


def _groups(rows):
    out = {}
    for r in rows:
        out.setdefault((r.method, r.k), []).append(r)
    return out


def evaluate_gates(rows, config):
    """Pass/fail per (method, degree) for the rate and ratio properties."""
    gates = []

    def gate(name, method, k, ok, value, bound):
        gates.append({"gate": name, "method": method, "k": k, "passed": bool(ok), "value": value, "bound": bound})

    for (method, k), seq in _groups(rows).items():
        failed = any(r.status == "solver-failure" for r in seq)
        gate("solved", method, k, not failed, len(seq), len(config.levels_for(k)))
        if failed:
            continue
        qo = [r.quasi_opt for r in seq]
        se = [r.stab_eff for r in seq]
        gate("quasi-optimality", method, k, max(qo) <= RATIO_CAP and _growth_ok(qo), max(qo), RATIO_CAP)
        # flat trend read on the last pair, where the oscillation no longer dominates
        gate("stabilization-efficiency", method, k, max(se) <= RATIO_CAP and _growth_ok(se[-2:]), max(se), RATIO_CAP)
        if len(seq) < 2:
            continue
        last = seq[-1]
        rate = config.expected_rate(method, k)
        gate("energy-rate", method, k, last.eoc_energy >= rate - RATE_SLACK, last.eoc_energy, rate - RATE_SLACK)
        bump = min(1, k - 1)
        h1_bound = rate + 0.5 * bump - 0.2
        gate("h1-rate", method, k, last.eoc_h1 >= h1_bound, last.eoc_h1, h1_bound)
        if method != "nip":
            l2_bound = rate + bump - 0.2
            gate("l2-rate", method, k, last.eoc_l2 >= l2_bound, last.eoc_l2, l2_bound)
    return gates


def _growth_ok(values, factor=RATIO_GROWTH):
    # tiny ratios (stabilization far below the best error) are flat by definition
    return all(b <= factor * a or b <= 1e-3 for a, b in zip(values, values[1:]))


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def write_reports(rows, gates, output, config=None):
    """Write ``<output>.csv`` (one row per method x degree x level) and ``<output>.json``."""
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    csv_path = out.with_suffix(".csv")
    json_path = out.with_suffix(".json")
    dicts = [r.as_dict() for r in rows]
    with open(csv_path, "w", newline="") as fh:
        if dicts:
            writer = csv.DictWriter(fh, fieldnames=list(dicts[0]))
            writer.writeheader()
            writer.writerows(dicts)
    summary = {
        "config": None if config is None else {k: v for k, v in vars(config).items()},
        "passed": all(g["passed"] for g in gates),
        "gates": [{k: _clean(v) for k, v in g.items()} for g in gates],
        "rows": [{k: _clean(v) for k, v in d.items()} for d in dicts],
    }
    json_path.write_text(json.dumps(summary, indent=2, default=str))
    return csv_path, json_path

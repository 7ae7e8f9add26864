import csv
import json

import numpy as np
import pytest

from polybiharm.errors import InvalidParameterError, SolverFailure
from polybiharm.localops import Discretization, HybridField, interpolate
from polybiharm.mesh import generate_mesh
from polybiharm.solver import SolveReport
from polybiharm.study import (
    PolynomialFunction,
    StudyConfig,
    compute_eoc,
    compute_errors,
    evaluate_gates,
    manufactured_case,
    parse_config,
    run_study,
    write_reports,
)
from polybiharm.study import harness
from polybiharm.study.cases import bilaplacian_fd

INTERIOR = np.array([[0.3, 0.4], [0.5, 0.5], [0.71, 0.22], [0.15, 0.85]])


@pytest.mark.parametrize("name", ["sine-squared", "polynomial-bubble"])
def test_load_matches_finite_differences(name):
    case = manufactured_case(name)
    fd = bilaplacian_fd(case.value, INTERIOR, step=5e-3)
    np.testing.assert_allclose(case.load(INTERIOR), fd, rtol=2e-3, atol=1e-3)


@pytest.mark.parametrize("name", ["sine-squared", "polynomial-bubble"])
def test_derivatives_match_finite_differences(name):
    case = manufactured_case(name)
    eps = 1e-6
    for p in INTERIOR:
        g = case.gradient(p[None])[0]
        fd = [(case.value((p + e)[None]) - case.value((p - e)[None]))[0] / (2 * eps) for e in np.eye(2) * eps]
        np.testing.assert_allclose(g, fd, atol=1e-7)
        H = case.hessian(p[None])[0]
        fdH = np.array([(case.gradient((p + e)[None]) - case.gradient((p - e)[None]))[0] / (2 * eps) for e in np.eye(2) * eps])
        np.testing.assert_allclose(H, fdH, atol=1e-5)


def test_sine_squared_load_at_centre():
    assert manufactured_case("sine-squared").load(np.array([[0.5, 0.5]]))[0] == pytest.approx(24 * np.pi**4, rel=1e-14)


def test_bubble_load_is_the_polynomial_bilaplacian():
    a = np.array([0, 0, 1, -2, 1.0])
    p = PolynomialFunction(np.outer(a, a))
    case = manufactured_case("polynomial-bubble")
    pts = np.random.default_rng(0).random((10, 2))
    np.testing.assert_allclose(case.value(pts), p(pts), atol=1e-15)
    np.testing.assert_allclose(case.load(pts), p.bilaplacian(pts), rtol=1e-13)


@pytest.mark.parametrize("name", ["sine-squared", "polynomial-bubble"])
def test_clamped_boundary(name):
    case = manufactured_case(name)
    t = np.linspace(0, 1, 11)
    edges = np.concatenate([np.column_stack([t, 0 * t]), np.column_stack([t, 1 + 0 * t]), np.column_stack([0 * t, t]), np.column_stack([1 + 0 * t, t])])
    assert np.abs(case.value(edges)).max() < 1e-15
    assert np.abs(case.gradient(edges)).max() < 1e-14


def test_unknown_case():
    with pytest.raises(InvalidParameterError):
        manufactured_case("bump")


@pytest.mark.parametrize(
    "errors,h,rate",
    [([1.0, 0.25], [1.0, 0.5], 2.0), ([0.3, 0.3], [0.2, 0.1], 0.0), ([8.0, 1.0], [2.0, 1.0], 3.0)],
)
def test_eoc_examples(errors, h, rate):
    assert compute_eoc(errors, h)[0] == pytest.approx(rate, abs=1e-14)


@pytest.mark.parametrize("errors,h", [([1.0], [1.0]), ([1.0, 0.0], [1.0, 0.5]), ([1.0, 0.5], [0.5, 0.5]), ([1.0, -1.0], [1.0, 0.5]), ([1, 2, 3], [1, 2])])
def test_eoc_invalid(errors, h):
    with pytest.raises(InvalidParameterError):
        compute_eoc(errors, h)


@pytest.mark.parametrize("method", ["wg", "sip", "hho"])
def test_errors_of_zero_field(method):
    disc = Discretization(generate_mesh("cartesian", 2), 2)
    case = manufactured_case("sine-squared")
    zero = HybridField.zeros(disc, method)
    rep = compute_errors(disc, method, zero, case, quad_degree=40)
    # |D^2 u|_L2 = sqrt(2) pi^2 and ||u||_L2 = 3/8 for u = sin^2(pi x) sin^2(pi y)
    assert rep.energy == pytest.approx(np.sqrt(2) * np.pi**2, rel=1e-12)
    assert rep.l2 == pytest.approx(3 / 8, rel=1e-12)
    # the default rule (degree 2k + 8) is already accurate to ~1e-9 on this coarse mesh
    assert compute_errors(disc, method, zero, case).energy == pytest.approx(rep.energy, rel=1e-8)
    assert rep.stab == 0.0
    assert rep.best <= rep.energy


@pytest.mark.parametrize("method", ["wg", "hho", "nip"])
def test_interpolant_energy_equals_best_approximation(method):
    disc = Discretization(generate_mesh("hexagonal", 4), 2)
    case = manufactured_case("sine-squared")
    rep = compute_errors(disc, method, interpolate(disc, method, case), case)
    assert rep.energy == pytest.approx(rep.best, rel=1e-10)
    assert rep.osc > 0


def test_bubble_is_represented_exactly_at_degree_eight():
    disc = Discretization(generate_mesh("cartesian", 2), 8)
    case = manufactured_case("polynomial-bubble")
    rep = compute_errors(disc, "hho", interpolate(disc, "hho", case), case)
    assert rep.best < 1e-9
    assert rep.osc < 1e-9


def test_discrete_solution_is_worse_than_best(discs):
    case = manufactured_case("sine-squared")
    mesh = generate_mesh("perturbed-quad", 4)
    for method in ("wg", "sip", "hho"):
        disc, system, uh, _ = harness.solve_case(mesh, method, 2, case)
        rep = compute_errors(disc, method, uh, case)
        assert rep.best <= rep.energy
        assert np.isfinite(rep.quasi_opt) and rep.quasi_opt >= rep.stab_eff


def test_error_report_kind_check():
    disc = Discretization(generate_mesh("cartesian", 2), 2)
    with pytest.raises(InvalidParameterError):
        compute_errors(disc, "hho", HybridField.zeros(disc, "wg"), manufactured_case("sine-squared"))


CONFIG = """
# small study
methods = wg, SIP
degrees = 2, 3
mesh = hexagonal
levels = 2, 4
levels.3 = 2
case = polynomial-bubble
sigma = 30
tolerance = 1e-9
solver = condensed
seed = 3
output = out/study   # trailing comment
expected_rate.wg = 1.5
"""


def test_parse_config():
    cfg = parse_config(CONFIG)
    assert cfg.methods == ["wg", "sip"]
    assert cfg.degrees == [2, 3]
    assert cfg.levels_for(2) == [2, 4] and cfg.levels_for(3) == [2]
    assert cfg.sigma == 30.0 and cfg.tolerance == 1e-9
    assert cfg.solver == "condensed" and cfg.seed == 3
    assert cfg.output == "out/study"
    assert cfg.expected_rate("wg", 2) == 1.5 and cfg.expected_rate("sip", 3) == 2


@pytest.mark.parametrize(
    "text,match",
    [
        ("methods = wg\nfoo = 1", "line 2: unknown key"),
        ("degrees = two", "line 1: bad value"),
        ("methods wg", "line 1: expected"),
        ("degrees = 1", "degrees"),
        ("methods = fem", "unknown method"),
        ("solver = magic", "unknown solver"),
        ("tolerance = 0", "tolerance"),
        ("sigma = -2", "sigma"),
        ("case = bump", "unknown manufactured case"),
    ],
)
def test_parse_config_errors(text, match):
    with pytest.raises(InvalidParameterError, match=match):
        parse_config(text)


def test_single_level_has_no_rates():
    cfg = StudyConfig(methods=["wg"], degrees=[2], levels=[2])
    rows = run_study(cfg)
    assert len(rows) == 1 and rows[0].eoc_energy is None
    gates = evaluate_gates(rows, cfg)
    assert {g["gate"] for g in gates} == {"solved", "quasi-optimality", "stabilization-efficiency"}


def test_small_study_rates_and_reports(tmp_path):
    cfg = StudyConfig(methods=["hho", "sip"], degrees=[2], levels=[4, 8], output=str(tmp_path / "r"))
    seen = []
    rows = run_study(cfg, progress=seen.append)
    assert len(seen) == 4
    assert all(r.eoc_energy is not None for r in rows if r.n == 8)
    assert all(r.eoc_energy > 0.7 for r in rows if r.n == 8)
    gates = evaluate_gates(rows, cfg)
    csv_path, json_path = write_reports(rows, gates, cfg.output, cfg)
    with open(csv_path) as fh:
        table = list(csv.DictReader(fh))
    assert len(table) == 4 and "quasi_opt" in table[0]
    doc = json.loads(json_path.read_text())
    assert doc["passed"] == all(g["passed"] for g in gates)
    assert len(doc["rows"]) == 4


def test_solver_failure_yields_partial_report(monkeypatch, tmp_path):
    real = harness.solve_case

    def flaky(mesh, method, k, *args, **kw):
        if mesh.n_cells > 16:
            raise SolverFailure("forced", SolveReport(7, 1e-3, "iterative-pcg", 0.0, False))
        return real(mesh, method, k, *args, **kw)

    monkeypatch.setattr(harness, "solve_case", flaky)
    cfg = StudyConfig(methods=["wg"], degrees=[2], levels=[4, 8, 16])
    rows = run_study(cfg)
    assert [r.status for r in rows] == ["ok", "solver-failure"]
    assert rows[1].residual == 1e-3 and np.isnan(rows[1].energy)
    gates = evaluate_gates(rows, cfg)
    assert [g for g in gates if g["gate"] == "solved"][0]["passed"] is False
    _, json_path = write_reports(rows, gates, tmp_path / "fail", cfg)
    doc = json.loads(json_path.read_text())
    assert doc["passed"] is False
    assert doc["rows"][1]["energy"] is None

import warnings

import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from conftest import unit_square_cell
from polybiharm.assembly import (
    CoercivityWarning,
    MethodConfig,
    assemble,
    assemble_rhs,
    build_dofmap,
    default_sigma,
    eval_ah,
    eval_bh,
    is_positive_definite,
    stab_form,
    stab_seminorm,
    write_matrix_market,
)
from polybiharm.basis import dim_p
from polybiharm.errors import InvalidDegreeError, InvalidParameterError
from polybiharm.localops import Discretization, HybridField, dg_discrete_laplacian, interpolate
from polybiharm.mesh import generate_mesh
from polybiharm.study import oracles
from polybiharm.study.cases import PolynomialFunction, manufactured_case


@pytest.mark.parametrize("method,ndof", [("wg", 44), ("sip", 24), ("nip", 24), ("hho", 40)])
def test_dof_counts(method, ndof):
    assert build_dofmap(generate_mesh("cartesian", 2), method, 2).ndof == ndof


def test_dofmap_roundtrip(discs, rng):
    disc = discs("hexagonal", 2, 3)
    for method in ("wg", "hho", "sip"):
        dm = build_dofmap(disc.mesh, method, 3)
        x = rng.standard_normal(dm.ndof)
        np.testing.assert_array_equal(dm.to_vector(dm.to_field(x)), x)
    with pytest.raises(InvalidParameterError):
        build_dofmap(disc.mesh, "wg", 3).to_vector(HybridField.zeros(disc, "hho"))


@pytest.mark.parametrize(
    "args,exc",
    [(("cg", 2), InvalidParameterError), (("wg", 1), InvalidDegreeError), (("sip", 2, 0.0), InvalidParameterError), (("nip", 2, -1), InvalidParameterError)],
)
def test_method_config_validation(args, exc):
    with pytest.raises(exc):
        MethodConfig(*args)


def test_method_config_defaults():
    assert MethodConfig("sip", 3).penalty == default_sigma(3) == 40
    assert MethodConfig("sip", 2).theta == 1 and MethodConfig("nip", 2).theta == -1
    assert not MethodConfig("nip", 2).symmetric
    assert MethodConfig("WG", 2).kind == "wg"


@pytest.mark.parametrize("method", ["wg", "sip", "hho"])
def test_symmetric_positive_definite(method, discs):
    disc = discs("perturbed-quad", 4, 2)
    A = assemble(disc, MethodConfig(method, 2)).matrix
    assert abs(A - A.T).max() <= 1e-12 * abs(A).max()
    assert is_positive_definite(A)
    assert is_positive_definite(A, dense_limit=0)


def test_nip_is_not_symmetric(discs):
    A = assemble(discs("cartesian", 4, 2), MethodConfig("nip", 2)).matrix
    assert abs(A - A.T).max() > 1e-3 * abs(A).max()


def test_positive_definite_detects_indefinite():
    A = sp.diags([1.0, -1.0, 2.0]).tocsr()
    assert not is_positive_definite(A)
    assert not is_positive_definite(A, dense_limit=0)


def test_zero_load(discs):
    disc = discs("hexagonal", 2, 2)
    assert not assemble_rhs(disc, "wg", lambda p: np.zeros(len(p))).any()


def test_unit_load_hits_constant_mode(discs):
    disc = discs("hexagonal", 3, 2)
    b = assemble_rhs(disc, "hho", lambda p: np.ones(len(p)))
    nk = dim_p(2)
    cells = b[: disc.n_cells * nk].reshape(disc.n_cells, nk)
    # phi_0 = 1 / sqrt(|K|) up to sign
    np.testing.assert_allclose(np.abs(cells[:, 0]), np.sqrt(disc.mesh.cell_area), rtol=1e-13)
    np.testing.assert_allclose(cells[:, 1:], 0.0, atol=1e-14)
    assert not b[disc.n_cells * nk :].any()


def test_load_vector_matches_oracle():
    disc = Discretization(generate_mesh("perturbed-quad", 3, seed=5), 3, quad_degree=24)
    case = manufactured_case("sine-squared")
    fast = assemble_rhs(disc, "sip", case)
    slow = oracles.cell_load_vector(disc, case.load, qdeg=30)
    assert np.abs(fast - slow).max() <= 1e-10 * np.abs(slow).max()


def test_rhs_needs_degree_with_mesh():
    with pytest.raises(InvalidParameterError):
        assemble_rhs(generate_mesh("cartesian", 2), "wg", lambda p: p[:, 0])


@pytest.mark.parametrize("method", ["wg", "hho"])
def test_hybrid_form_matches_oracle(method, discs, rng):
    disc = discs("hexagonal", 3, 2)
    sys_ = assemble(disc, MethodConfig(method, 2))
    u = HybridField.random(disc, method, rng)
    v = HybridField.random(disc, method, rng)
    slow = (oracles.wg_form if method == "wg" else oracles.hho_form)(disc, u, v)
    assert eval_ah(sys_, u, v) == pytest.approx(slow, rel=1e-10)


def test_bh_vanishes_for_smooth_interpolant():
    disc = Discretization(generate_mesh("cartesian", 2), 8)
    u = interpolate(disc, "sip", manufactured_case("polynomial-bubble"))
    v = HybridField.random(disc, "sip", np.random.default_rng(0))
    for theta in (1, -1):
        assert abs(eval_bh(disc, u, v, theta)) < 1e-10 * np.linalg.norm(v.cell)
    assert eval_bh(disc, v, HybridField.zeros(disc, "sip"), 1) == 0.0


def test_bh_rejects_hybrid_fields(discs):
    disc = discs("cartesian", 2, 2)
    with pytest.raises(InvalidParameterError):
        eval_bh(disc, HybridField.zeros(disc, "wg"), HybridField.zeros(disc, "wg"), 1)


@pytest.mark.parametrize("method", ["sip", "nip"])
@pytest.mark.parametrize("kind", ["cartesian", "hexagonal"])
def test_dg_form_decomposition(method, kind, discs, rng):
    # a_h = (Delta_h u, Delta_h v) + b_h(u, v) + sigma s_h(u, v)
    disc = discs(kind, 3, 3)
    cfg = MethodConfig(method, 3, sigma=7.5)
    sys_ = assemble(disc, cfg, probe=False)
    u = HybridField.random(disc, method, rng)
    v = HybridField.random(disc, method, rng)
    lhs = eval_ah(sys_, u, v)
    dh = (dg_discrete_laplacian(disc, u) * dg_discrete_laplacian(disc, v)).sum()
    rhs = dh + eval_bh(disc, u, v, cfg.theta) + cfg.penalty * stab_form(disc, method, u, v)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12 * abs(dh))


def test_nip_energy_is_penalty_plus_broken_laplacian(discs, rng):
    # the consistency and adjoint terms cancel on the diagonal for theta = -1
    disc = discs("hexagonal", 3, 2)
    sys_ = assemble(disc, MethodConfig("nip", 2, sigma=1.0))
    for _ in range(20):
        v = HybridField.random(disc, "nip", rng)
        broken = sum(c @ ((e.lap * e.weights) @ e.lap.T) @ c for c, e in zip(v.cell, disc.elements))
        a = eval_ah(sys_, v, v)
        assert a == pytest.approx(broken + stab_form(disc, "nip", v, v), rel=1e-12)
        assert a > 0


@pytest.mark.parametrize("method", ["wg", "sip", "hho"])
def test_energy_scales_like_inverse_square(method, rng):
    # u_a(x) = u(x / a) on the mesh scaled by a: every term of a_h picks up a^-2
    p = PolynomialFunction.random(4, np.random.default_rng(3))
    alpha = 0.25
    a_, b_ = np.indices(p.coeffs.shape)
    pa = PolynomialFunction(p.coeffs * alpha ** -(a_ + b_).astype(float))
    mesh = generate_mesh("hexagonal", 3)
    vals = []
    for m, f in ((mesh, p), (mesh.scaled(alpha), pa)):
        disc = Discretization(m, 3)
        sys_ = assemble(disc, MethodConfig(method, 3), probe=False)
        u = interpolate(disc, method, f)
        vals.append(eval_ah(sys_, u, u))
    assert vals[1] == pytest.approx(alpha**-2 * vals[0], rel=1e-9)


def test_sparsity_follows_face_adjacency(discs):
    disc = discs("hexagonal", 3, 2)
    mesh = disc.mesh
    nk = dim_p(2)
    A = assemble(disc, MethodConfig("sip", 2)).matrix.tocoo()
    adj = {(K, K) for K in range(mesh.n_cells)}
    for Kp, Km in mesh.face_cells[mesh.interior_faces]:
        adj |= {(Kp, Km), (Km, Kp)}
    assert {(i // nk, j // nk) for i, j in zip(A.row, A.col)} <= adj

    wg = assemble(disc, MethodConfig("wg", 2))
    dm = wg.dofmap
    C = wg.matrix[: dm.n_cell_dofs, : dm.n_cell_dofs].tocoo()
    # cells never couple directly in a hybrid method
    assert all(i // nk == j // nk for i, j in zip(C.row, C.col))


def test_matrix_market_roundtrip(tmp_path, discs):
    sys_ = assemble(discs("cartesian", 2, 2), MethodConfig("hho", 2))
    path = tmp_path / "a.mtx"
    write_matrix_market(sys_, path)
    B = scipy.io.mmread(path)
    assert B.shape == sys_.matrix.shape
    assert abs(sp.csr_matrix(B) - sys_.matrix).max() <= 1e-14 * abs(sys_.matrix).max()


def test_coercivity_warning(discs):
    disc = discs("cartesian", 4, 2)
    with pytest.warns(CoercivityWarning, match="sigma"):
        sys_ = assemble(disc, MethodConfig("sip", 2, sigma=0.1))
    assert sys_.coercive is False
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert assemble(disc, MethodConfig("sip", 2)).coercive is True


def test_config_disc_degree_mismatch(discs):
    with pytest.raises(InvalidParameterError):
        assemble(discs("cartesian", 2, 2), MethodConfig("wg", 3))
    with pytest.raises(InvalidParameterError):
        assemble(discs("cartesian", 2, 2), "wg")


@pytest.mark.parametrize("method", ["wg", "hho", "sip"])
def test_stabilization_of_x_on_unit_square(method):
    # faces x=0, x=1 give 0 + 1 and 1 + 1 (value, normal); y=0, y=1 give 1/3 each
    disc = Discretization(unit_square_cell(), 2)
    u = interpolate(disc, method, PolynomialFunction([[0, 0], [1, 0]]))
    assert stab_seminorm(disc, method, u) == pytest.approx(np.sqrt(11 / 3), rel=1e-13)


def test_stab_form_checks_kind(discs):
    disc = discs("cartesian", 2, 2)
    with pytest.raises(InvalidParameterError):
        stab_form(disc, "hho", HybridField.zeros(disc, "wg"), HybridField.zeros(disc, "wg"))


def test_stab_seminorm_homogeneous(discs, rng):
    disc = discs("perturbed-quad", 3, 2)
    for method in ("wg", "hho", "sip"):
        u = HybridField.random(disc, method, rng)
        assert stab_seminorm(disc, method, -2.5 * u) == pytest.approx(2.5 * stab_seminorm(disc, method, u), rel=1e-13)

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polybiharm.errors import (
    InvalidParameterError,
    MeshConformityError,
    MeshParseError,
    MeshValidationError,
)
from polybiharm.mesh import (
    PolyMesh,
    derive_faces,
    export_mesh,
    generate_mesh,
    import_mesh,
    load_mesh,
    save_mesh,
    subtriangulate,
    validate_mesh,
)


def shoelace(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * (x @ np.roll(y, -1) - y @ np.roll(x, -1))


def test_cartesian_counts():
    m = generate_mesh("cartesian", 2)
    assert m.n_cells == 4
    assert m.n_faces == 12
    assert len(m.interior_faces) == 4


def test_perturbed_is_deterministic():
    a = generate_mesh("perturbed-quad", 4, seed=1)
    b = generate_mesh("perturbed-quad", 4, seed=1)
    assert a == b
    assert not a == generate_mesh("perturbed-quad", 4, seed=2)


def test_hexagonal_cells():
    m = generate_mesh("hexagonal", 4)
    sizes = {len(c) for c in m.cells}
    assert sizes <= {3, 4, 5, 6}
    assert 6 in sizes
    assert (m.cell_area > 0).all()
    for K in range(m.n_cells):
        assert np.isclose(shoelace(m.cell_polygon(K)), m.cell_area[K], rtol=1e-12)


@pytest.mark.parametrize("kind", ["cartesian", "perturbed-quad", "hexagonal"])
def test_cells_cover_unit_square(kind):
    m = generate_mesh(kind, 5)
    assert m.cell_area.sum() == pytest.approx(1.0, abs=1e-13)
    validate_mesh(m)


@pytest.mark.parametrize("n", [0, -1])
def test_bad_subdivision(n):
    with pytest.raises(InvalidParameterError):
        generate_mesh("cartesian", n)


def test_unknown_kind():
    with pytest.raises(InvalidParameterError):
        generate_mesh("voronoi", 4)


def test_two_triangles():
    verts = [[0, 0], [1, 0], [1, 1], [0, 1]]
    m = PolyMesh(verts, [[0, 1, 2], [0, 2, 3]])
    assert len(m.interior_faces) == 1
    assert len(m.boundary_faces) == 4


@pytest.mark.parametrize("kind", ["cartesian", "perturbed-quad", "hexagonal"])
def test_normal_is_outward_for_owner(kind):
    m = generate_mesh(kind, 3)
    for S in range(m.n_faces):
        nu = m.face_normal[S]
        assert np.linalg.norm(nu) == pytest.approx(1.0)
        Kp = m.face_cells[S, 0]
        # outward: pointing away from the owner centroid
        assert (m.face_midpoint[S] - m.cell_centroid[Kp]) @ nu > 0
        Km = m.face_cells[S, 1]
        if Km >= 0:
            assert (m.face_midpoint[S] - m.cell_centroid[Km]) @ nu < 0
            assert Kp < Km


def test_cell_signs_match_owner():
    m = generate_mesh("hexagonal", 3)
    for K in range(m.n_cells):
        for S, s in zip(m.cell_faces[K], m.cell_signs[K]):
            assert s == (1 if m.face_cells[S, 0] == K else -1)


def test_normals_close_per_cell():
    m = generate_mesh("perturbed-quad", 4, seed=3)
    for K in range(m.n_cells):
        f = m.cell_faces[K]
        closure = (m.cell_signs[K][:, None] * m.face_normal[f] * m.face_length[f, None]).sum(0)
        assert np.abs(closure).max() < 1e-14


def test_rederive_faces_from_export():
    m = generate_mesh("perturbed-quad", 4, seed=7)
    doc = json.loads(export_mesh(m))
    ft = derive_faces(np.array(doc["vertices"]), doc["cells"])
    a = {tuple(sorted(p)) for p in m.face_vertices.tolist()}
    b = {tuple(sorted(p)) for p in ft.vertices.tolist()}
    assert a == b


def test_hanging_node_rejected():
    # right half split in two, left cell not refined along the shared edge
    verts = [[0, 0], [1, 0], [2, 0], [2, 0.5], [2, 1], [1, 1], [0, 1], [1, 0.5]]
    cells = [[0, 1, 5, 6], [1, 2, 3, 7], [7, 3, 4, 5]]
    with pytest.raises(MeshConformityError):
        PolyMesh(verts, cells)


def test_same_direction_rejected():
    verts = [[0, 0], [1, 0], [0.5, 1], [0.5, 2]]
    with pytest.raises(MeshConformityError, match="same direction"):
        PolyMesh(verts, [[0, 1, 2], [0, 1, 3]])


def test_duplicate_face_rejected():
    verts = [[0, 0], [1, 0], [0.5, 1], [0.5, -1], [0.5, 2]]
    with pytest.raises(MeshValidationError):
        PolyMesh(verts, [[0, 1, 2], [1, 0, 3], [0, 1, 4]])


def test_zero_area_cell_rejected():
    verts = [[0, 0], [1, 0], [2, 0], [1, 1]]
    with pytest.raises(MeshValidationError):
        PolyMesh(verts, [[0, 1, 2]])


def test_inverted_cell_rejected():
    verts = [[0, 0], [1, 0], [1, 1], [0, 1]]
    with pytest.raises(MeshValidationError):
        PolyMesh(verts, [[0, 3, 2, 1]])


def test_dangling_vertex():
    verts = [[0, 0], [1, 0], [1, 1], [0, 1], [5, 5]]
    m = PolyMesh(verts, [[0, 1, 2, 3]])
    with pytest.raises(MeshValidationError, match="dangling"):
        validate_mesh(m)


def test_subtriangulate_square():
    m = PolyMesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2, 3]])
    tris = subtriangulate(m, 0)
    assert tris.shape == (4, 3, 2)
    areas = [shoelace(t) for t in tris]
    np.testing.assert_allclose(areas, 0.25, atol=1e-15)


def test_subtriangulate_hexagon():
    ang = np.arange(6) * np.pi / 3
    verts = np.column_stack([np.cos(ang), np.sin(ang)])
    m = PolyMesh(verts, [list(range(6))])
    tris = subtriangulate(m, 0)
    assert len(tris) == 6
    assert sum(shoelace(t) for t in tris) == pytest.approx(1.5 * np.sqrt(3), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 2 * np.pi, allow_nan=False), min_size=3, max_size=9, unique=True), st.floats(0.3, 3.0))
def test_subtriangulate_random_convex(angles, radius):
    ang = np.sort(np.array(angles))
    if np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]])).min() < 1e-2:
        return
    verts = radius * np.column_stack([np.cos(ang), np.sin(ang)])
    if shoelace(verts) < 1e-3:
        return
    m = PolyMesh(verts, [list(range(len(ang)))])
    tris = subtriangulate(m, 0)
    assert sum(shoelace(t) for t in tris) == pytest.approx(shoelace(verts), abs=1e-12)


def test_cartesian_face_ratio():
    rep = validate_mesh(generate_mesh("cartesian", 4))
    assert rep.min_face_ratio == pytest.approx(1 / np.sqrt(2))


def test_hexagonal_regularity_is_level_independent():
    reps = [validate_mesh(generate_mesh("hexagonal", n)) for n in (4, 8, 16)]
    for attr in ("min_aspect", "min_face_ratio", "min_triangle_shape"):
        vals = [getattr(r, attr) for r in reps]
        assert min(vals) > 0.2
        assert max(vals) / min(vals) < 1.05


def test_scaled_mesh():
    m = generate_mesh("hexagonal", 3)
    s = m.scaled(0.5)
    np.testing.assert_allclose(s.cell_area, 0.25 * m.cell_area)
    np.testing.assert_allclose(s.face_normal, m.face_normal)


def test_export_import_roundtrip(tmp_path):
    m = generate_mesh("cartesian", 2)
    m2 = import_mesh(export_mesh(m))
    assert (m2.n_cells, m2.n_faces) == (m.n_cells, m.n_faces)
    np.testing.assert_array_equal(m2.vertices, m.vertices)
    path = tmp_path / "m.json"
    save_mesh(m, path)
    assert load_mesh(path) == m


def test_hand_written_two_cell_file():
    text = '{"vertices": [[0,0],[1,0],[2,0],[2,1],[1,1],[0,1]], "cells": [[0,1,4,5],[1,2,3,4]]}'
    m = import_mesh(text)
    assert len(m.interior_faces) == 1
    assert m.n_faces == 7


def test_index_out_of_range():
    text = '{"vertices": [[0,0],[1,0],[1,1]], "cells": [[0,1,3]]}'
    with pytest.raises(MeshParseError, match=r"cells\[0\]\[2\]"):
        import_mesh(text)


def test_malformed_document_reports_position():
    with pytest.raises(MeshParseError, match="line 2"):
        import_mesh('{"vertices": [[0,0]],\n "cells": [[0,1,2]')


def test_bad_vertex_entry():
    with pytest.raises(MeshParseError, match=r"vertices\[1\]"):
        import_mesh('{"vertices": [[0,0],[1],[1,1]], "cells": [[0,1,2]]}')

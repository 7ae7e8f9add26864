"""Two-dimensional polygonal meshes with oriented faces.

A :class:`PolyMesh` stores counter-clockwise vertex loops for its cells and a
derived face table.  Every face carries a fixed unit normal: for interior
faces it is the outward normal of the owner cell ``K+`` (the lower-numbered
of the two cells), for boundary faces the outward normal of the domain.
Cell ``K`` sees face ``S`` with sign ``sigma_K = nu_K . nu_S`` in {+1, -1}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidParameterError,
    MeshConformityError,
    MeshParseError,
    MeshValidationError,
)

__all__ = [
    "PolyMesh",
    "RegularityReport",
    "derive_faces",
    "generate_mesh",
    "subtriangulate",
    "validate_mesh",
    "import_mesh",
    "export_mesh",
    "load_mesh",
    "save_mesh",
]

_BOUNDARY = -1


def _shoelace(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _polygon_centroid(poly):
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return np.array([cx, cy])


def _diameter(poly):
    d = poly[:, None, :] - poly[None, :, :]
    return float(np.sqrt((d**2).sum(axis=-1)).max())


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FaceTable:
    """Output of :func:`derive_faces`.

    ``vertices[s]`` is the edge as traversed by its owner cell, so the normal
    is that vertex pair rotated clockwise.  ``cells[s] = (K+, K-)`` with
    ``K- = -1`` on the boundary.  ``cell_faces[K]`` lists the faces of ``K``
    in the order of its edges, ``cell_signs[K]`` the matching ``sigma_K``.
    """

    vertices: np.ndarray
    cells: np.ndarray
    cell_faces: tuple
    cell_signs: tuple


def derive_faces(vertices, cells):
    """Build the oriented face table of a conforming polygonal partition."""
    vertices = np.asarray(vertices, dtype=float)
    edge_index = {}
    face_vertices = []
    face_cells = []
    cell_faces = []
    cell_signs = []
    for K, loop in enumerate(cells):
        loop = [int(i) for i in loop]
        fl, sl = [], []
        for i, a in enumerate(loop):
            b = loop[(i + 1) % len(loop)]
            if a == b:
                raise MeshValidationError(f"cell {K} has a repeated vertex {a}")
            key = (min(a, b), max(a, b))
            s = edge_index.get(key)
            if s is None:
                s = len(face_vertices)
                edge_index[key] = s
                face_vertices.append((a, b))
                face_cells.append([K, _BOUNDARY])
                fl.append(s)
                sl.append(1)
                continue
            if face_cells[s][1] != _BOUNDARY:
                raise MeshValidationError(
                    f"duplicate face: edge ({a}, {b}) is shared by more than two cells "
                    f"({face_cells[s][0]}, {face_cells[s][1]}, {K})"
                )
            if face_vertices[s] != (b, a):
                raise MeshConformityError(
                    f"edge ({a}, {b}) is traversed in the same direction by cells "
                    f"{face_cells[s][0]} and {K}; overlapping or inverted cells"
                )
            if face_cells[s][0] == K:
                raise MeshValidationError(f"cell {K} traverses edge ({a}, {b}) twice")
            face_cells[s][1] = K
            fl.append(s)
            sl.append(-1)
        cell_faces.append(np.array(fl, dtype=int))
        cell_signs.append(np.array(sl, dtype=int))

    face_vertices = np.array(face_vertices, dtype=int).reshape(-1, 2)
    face_cells = np.array(face_cells, dtype=int).reshape(-1, 2)

    # a vertex strictly inside a single-sided edge is a hanging node
    single = np.flatnonzero(face_cells[:, 1] == _BOUNDARY)
    used = np.unique(np.concatenate([np.asarray(c, dtype=int) for c in cells]))
    pts = vertices[used]
    for s in single:
        a, b = vertices[face_vertices[s]]
        d = b - a
        length2 = float(d @ d)
        rel = pts - a
        t = rel @ d / length2
        dist2 = ((rel - np.outer(t, d)) ** 2).sum(axis=1)
        hit = (t > 1e-10) & (t < 1 - 1e-10) & (dist2 < 1e-20 * max(length2, 1.0))
        if hit.any():
            v = used[np.flatnonzero(hit)[0]]
            raise MeshConformityError(
                f"non-matching edges: vertex {v} lies inside edge "
                f"({face_vertices[s][0]}, {face_vertices[s][1]})"
            )
    return FaceTable(face_vertices, face_cells, tuple(cell_faces), tuple(cell_signs))


class PolyMesh:
    """Immutable polygonal mesh.

    Parameters
    ----------
    vertices : (nv, 2) array_like
    cells : sequence of vertex-index loops, counter-clockwise
    """

    def __init__(self, vertices, cells):
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshValidationError("vertices must be an (n, 2) array")
        cells = tuple(_readonly(np.asarray(c, dtype=int)) for c in cells)
        if not cells:
            raise MeshValidationError("mesh has no cells")
        for K, c in enumerate(cells):
            if len(c) < 3:
                raise MeshValidationError(f"cell {K} has fewer than 3 vertices")
            if c.min() < 0 or c.max() >= len(vertices):
                raise MeshValidationError(f"cell {K} references a vertex out of range")
        self.vertices = _readonly(vertices)
        self.cells = cells

        polys = [vertices[c] for c in cells]
        area = np.array([_shoelace(p) for p in polys])
        bad = np.flatnonzero(area <= 0)
        if bad.size:
            K = bad[0]
            kind = "zero-area" if abs(area[K]) <= 1e-300 else "inverted (clockwise)"
            raise MeshValidationError(f"cell {K} is {kind}: signed area {area[K]:.3e}")
        self.cell_area = _readonly(area)
        self.cell_centroid = _readonly(np.array([_polygon_centroid(p) for p in polys]))
        self.cell_diameter = _readonly(np.array([_diameter(p) for p in polys]))

        table = derive_faces(vertices, cells)
        self.face_vertices = _readonly(table.vertices)
        self.face_cells = _readonly(table.cells)
        self.cell_faces = tuple(_readonly(f) for f in table.cell_faces)
        self.cell_signs = tuple(_readonly(s) for s in table.cell_signs)

        a = vertices[table.vertices[:, 0]]
        b = vertices[table.vertices[:, 1]]
        d = b - a
        length = np.sqrt((d**2).sum(axis=1))
        tangent = d / length[:, None]
        self.face_length = _readonly(length)
        self.face_tangent = _readonly(tangent)
        # outward normal of K+ for a counter-clockwise loop; tangent = normal rotated by +90 deg
        self.face_normal = _readonly(np.column_stack([tangent[:, 1], -tangent[:, 0]]))
        self.face_midpoint = _readonly(0.5 * (a + b))

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_faces(self):
        return len(self.face_cells)

    @property
    def h_max(self):
        return float(self.cell_diameter.max())

    @property
    def is_boundary_face(self):
        return self.face_cells[:, 1] == _BOUNDARY

    @property
    def interior_faces(self):
        return np.flatnonzero(self.face_cells[:, 1] != _BOUNDARY)

    @property
    def boundary_faces(self):
        return np.flatnonzero(self.face_cells[:, 1] == _BOUNDARY)

    def cell_polygon(self, K):
        return self.vertices[self.cells[K]]

    def face_endpoints(self, S):
        return self.vertices[self.face_vertices[S]]

    def is_interior_cell(self, K):
        """True if no face of ``K`` lies on the boundary."""
        return bool((self.face_cells[self.cell_faces[K], 1] != _BOUNDARY).all())

    def scaled(self, alpha):
        return PolyMesh(alpha * self.vertices, self.cells)

    def __eq__(self, other):
        if not isinstance(other, PolyMesh):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and len(self.cells) == len(other.cells)
            and all(np.array_equal(a, b) for a, b in zip(self.cells, other.cells))
        )

    __hash__ = object.__hash__

    def __repr__(self):
        return (
            f"PolyMesh(n_vertices={len(self.vertices)}, n_cells={self.n_cells}, "
            f"n_faces={self.n_faces}, h_max={self.h_max:.4g})"
        )


def subtriangulate(mesh, K):
    """Centroid-fan triangles of cell ``K`` as an (n, 3, 2) array."""
    poly = mesh.cell_polygon(K)
    c = mesh.cell_centroid[K]
    tris = np.empty((len(poly), 3, 2))
    tris[:, 0] = c
    tris[:, 1] = poly
    tris[:, 2] = np.roll(poly, -1, axis=0)
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    tol = 1e-14 * mesh.cell_diameter[K] ** 2
    if (area <= tol).any():
        raise MeshValidationError(
            f"cell {K}: degenerate fan triangle (area {area.min():.3e}); "
            "cell is not star-shaped with respect to its centroid"
        )
    return tris


@dataclass(frozen=True)
class RegularityReport:
    """Empirical shape-regularity surrogates.

    ``aspect`` is sqrt(|K|)/h_K per cell, ``face_ratio`` is h_S/h_K over all
    (cell, face) pairs and ``triangle_shape`` is 4*sqrt(3)*|T|/sum(edge^2) over
    all fan triangles (1 for an equilateral triangle).
    """

    min_aspect: float
    max_aspect: float
    min_face_ratio: float
    min_triangle_shape: float

    def as_dict(self):
        return dict(
            min_aspect=self.min_aspect,
            max_aspect=self.max_aspect,
            min_face_ratio=self.min_face_ratio,
            min_triangle_shape=self.min_triangle_shape,
        )


def validate_mesh(mesh):
    """Check the mesh invariants and return a :class:`RegularityReport`."""
    used = np.zeros(len(mesh.vertices), dtype=bool)
    for c in mesh.cells:
        used[c] = True
    if not used.all():
        v = int(np.flatnonzero(~used)[0])
        raise MeshValidationError(f"dangling vertex {v} is not used by any cell")
    if (mesh.face_length <= 0).any():
        raise MeshValidationError("zero-length face")

    aspect = np.sqrt(mesh.cell_area) / mesh.cell_diameter
    face_ratio = []
    tri_shape = []
    for K in range(mesh.n_cells):
        faces = mesh.cell_faces[K]
        signs = mesh.cell_signs[K]
        hK = mesh.cell_diameter[K]
        closure = (signs[:, None] * mesh.face_normal[faces] * mesh.face_length[faces, None]).sum(0)
        if np.abs(closure).max() > 1e-12 * hK:
            raise MeshValidationError(f"cell {K}: face normals do not close ({closure})")
        owner = mesh.face_cells[faces, 0] == K
        if not np.array_equal(owner, signs > 0):
            raise MeshValidationError(f"cell {K}: face orientation inconsistent with owner")
        face_ratio.append(mesh.face_length[faces] / hK)
        tris = subtriangulate(mesh, K)
        e = np.stack([tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 1], tris[:, 0] - tris[:, 2]], axis=1)
        e1, e2 = e[:, 0], -e[:, 2]
        area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        tri_shape.append(4 * np.sqrt(3) * area / (e**2).sum(axis=(1, 2)))
    if not np.isclose(mesh.cell_area.sum(), _domain_area(mesh), rtol=1e-12, atol=1e-14):
        raise MeshValidationError("cells do not cover the domain bounded by the boundary faces")
    face_ratio = np.concatenate(face_ratio)
    tri_shape = np.concatenate(tri_shape)
    return RegularityReport(
        min_aspect=float(aspect.min()),
        max_aspect=float(aspect.max()),
        min_face_ratio=float(face_ratio.min()),
        min_triangle_shape=float(tri_shape.min()),
    )


def _domain_area(mesh):
    # signed area enclosed by the boundary faces, oriented by their owners
    b = mesh.boundary_faces
    p = mesh.vertices[mesh.face_vertices[b]]
    return 0.5 * float((p[:, 0, 0] * p[:, 1, 1] - p[:, 1, 0] * p[:, 0, 1]).sum())


# --------------------------------------------------------------------------- generators


def _cartesian(n, rng=None, perturb=0.0):
    h = 1.0 / n
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    if perturb > 0:
        interior = (X.ravel() > 0) & (X.ravel() < 1) & (Y.ravel() > 0) & (Y.ravel() < 1)
        m = int(interior.sum())
        r = perturb * h * rng.uniform(0.0, 1.0, m)
        phi = rng.uniform(0.0, 2 * np.pi, m)
        verts[interior] += np.column_stack([r * np.cos(phi), r * np.sin(phi)])

    def vid(i, j):
        return i * (n + 1) + j

    cells = [
        [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
        for j in range(n)
        for i in range(n)
    ]
    return verts, cells


def _hexagonal(n):
    """Brick-wall hexagons, n bricks per row and n rows; odd rows are offset by half a brick."""
    w = 1.0 / n
    H = 1.0 / n
    eps = H / 6.0
    m = n

    def corners(r):
        # half-brick indices (x = i*w/2) of the cell corners in row r
        if r % 2 == 0:
            return list(range(0, 2 * n + 1, 2))
        return [0] + list(range(1, 2 * n, 2)) + [2 * n]

    corner_sets = [set(corners(r)) for r in range(m)]
    index = {}
    verts = []

    def vertex(line, i):
        key = (line, i)
        v = index.get(key)
        if v is not None:
            return v
        y = line * H
        if 0 < line < m:
            below = i in corner_sets[line - 1]
            above = i in corner_sets[line]
            if above and not below:
                y += eps
            elif below and not above:
                y -= eps
        index[key] = len(verts)
        verts.append((i * w / 2, y))
        return index[key]

    def line_points(line):
        if line == 0:
            return sorted(corner_sets[0])
        if line == m:
            return sorted(corner_sets[m - 1])
        return sorted(corner_sets[line - 1] | corner_sets[line])

    points = [line_points(L) for L in range(m + 1)]
    cells = []
    for r in range(m):
        cs = corners(r)
        for a, b in zip(cs[:-1], cs[1:]):
            bottom = [i for i in points[r] if a <= i <= b]
            top = [i for i in points[r + 1] if a <= i <= b][::-1]
            cells.append([vertex(r, i) for i in bottom] + [vertex(r + 1, i) for i in top])
    return np.array(verts), cells


def generate_mesh(kind, n, seed=0):
    """Mesh of the unit square.

    kind : {"cartesian", "perturbed-quad", "hexagonal"}
    n : subdivisions per direction (n >= 1)
    seed : generator seed for ``perturbed-quad``; interior vertices move by at
        most 0.2/n
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidParameterError(f"subdivision count must be a positive integer, got {n!r}")
    n = int(n)
    if kind == "cartesian":
        verts, cells = _cartesian(n)
    elif kind == "perturbed-quad":
        verts, cells = _cartesian(n, np.random.default_rng(seed), perturb=0.2)
    elif kind == "hexagonal":
        verts, cells = _hexagonal(n)
    else:
        raise InvalidParameterError(f"unknown mesh kind {kind!r}")
    return PolyMesh(verts, cells)


# --------------------------------------------------------------------------- file format


def export_mesh(mesh):
    """JSON text ``{"vertices": [[x, y], ...], "cells": [[i0, i1, ...], ...]}``."""
    doc = {
        "vertices": [[float(x), float(y)] for x, y in mesh.vertices],
        "cells": [[int(i) for i in c] for c in mesh.cells],
    }
    return json.dumps(doc)


def import_mesh(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeshParseError(f"malformed mesh document: {exc.msg}", f"line {exc.lineno}, column {exc.colno}") from exc
    if not isinstance(doc, dict):
        raise MeshParseError("mesh document must be a JSON object", "top level")
    for key in ("vertices", "cells"):
        if key not in doc:
            raise MeshParseError(f"missing field {key!r}", "top level")
        if not isinstance(doc[key], list):
            raise MeshParseError(f"field {key!r} must be a list", key)
    verts = []
    for i, v in enumerate(doc["vertices"]):
        if not (isinstance(v, list) and len(v) == 2 and all(_is_number(c) for c in v)):
            raise MeshParseError("vertex must be a pair of numbers", f"vertices[{i}]")
        verts.append([float(v[0]), float(v[1])])
    nv = len(verts)
    cells = []
    for K, c in enumerate(doc["cells"]):
        if not isinstance(c, list) or len(c) < 3:
            raise MeshParseError("cell must list at least 3 vertex indices", f"cells[{K}]")
        for j, i in enumerate(c):
            if not isinstance(i, int) or isinstance(i, bool):
                raise MeshParseError("vertex index must be an integer", f"cells[{K}][{j}]")
            if not 0 <= i < nv:
                raise MeshParseError(f"vertex index {i} out of range [0, {nv})", f"cells[{K}][{j}]")
        cells.append(c)
    return PolyMesh(np.array(verts).reshape(-1, 2), cells)


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def save_mesh(mesh, path):
    with open(path, "w") as fh:
        fh.write(export_mesh(mesh))


def load_mesh(path):
    with open(path) as fh:
        return import_mesh(fh.read())

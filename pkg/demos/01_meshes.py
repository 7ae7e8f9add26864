"""Mesh families on the unit square and their regularity numbers.

Run:  python3 demos/01_meshes.py

The three generated families are refined by the subdivision count n.  The
regularity report (minimum aspect ratio, face-to-diameter ratio, shape of
the centroid subtriangles) should not drift with n; that is what makes the
convergence studies meaningful.
"""

import numpy as np

from polybiharm.mesh import PolyMesh, export_mesh, generate_mesh, import_mesh, validate_mesh

for kind in ("cartesian", "perturbed-quad", "hexagonal"):
    print(f"\n{kind}")
    print(f"{'n':>4} {'cells':>6} {'faces':>6} {'h_max':>8} {'aspect':>7} {'face/h':>7} {'tri':>6}")
    for n in (4, 8, 16, 32):
        m = generate_mesh(kind, n, seed=0)
        r = validate_mesh(m)
        print(
            f"{n:4d} {m.n_cells:6d} {m.n_faces:6d} {m.h_max:8.4f} "
            f"{r.min_aspect:7.3f} {r.min_face_ratio:7.3f} {r.min_triangle_shape:6.3f}"
        )

# hexagonal cells touching the boundary are clipped, so the edge counts vary
hexes = generate_mesh("hexagonal", 4)
sizes, counts = np.unique([len(c) for c in hexes.cells], return_counts=True)
print("\nhexagonal n=4 edge counts:", dict(zip(sizes.tolist(), counts.tolist())))

# a hand-written mesh goes through the same checks as the generated ones
text = '{"vertices": [[0,0],[1,0],[2,0],[2,1],[1,1],[0,1]], "cells": [[0,1,4,5],[1,2,3,4]]}'
two = import_mesh(text)
print(f"\ntwo-cell file: {two.n_faces} faces, interior faces {two.interior_faces.tolist()}")
for S in two.interior_faces:
    print(f"  face {S}: owner K+={two.face_cells[S, 0]}, neighbour K-={two.face_cells[S, 1]}, nu={two.face_normal[S]}")

# the JSON form round-trips
again = import_mesh(export_mesh(hexes))
print("round trip equal:", again == hexes)

try:
    PolyMesh([[0, 0], [1, 0], [2, 0], [1, 1]], [[0, 1, 2]])
except ValueError as exc:
    print("rejected:", exc)

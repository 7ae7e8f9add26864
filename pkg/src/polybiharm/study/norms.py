"""Sampled constants of the discrete norm equivalences.

For every method the stabilization controls the gap between the discrete
second-order operator and its piecewise counterpart:

* WG:  ||Delta_h v - Delta_pw v_M|| <= C |v|_s
* DG:  ||Delta_h v - Delta_pw v||   <= C |v|_s
* HHO: ||D2_pw(R_h v - v_M)||       <= C |v|_s

and the energy norm is equivalent to (||L v_M||^2 + |v|_s^2)^(1/2), with L the
piecewise Laplacian (WG, DG) or Hessian (HHO).  ``norm_ratios`` returns the
three ratios for one field; ``sample_norm_ratios`` collects them over random
fields.
"""

from __future__ import annotations

import numpy as np

from ..assembly import stab_form
from ..basis import dim_p
from ..localops import HybridField, dg_laplacian_operator, field_kind, hho_reconstruction_map, wg_laplacian_map

__all__ = ["norm_ratios", "sample_norm_ratios", "NormTables"]


class NormTables:
    """Per-mesh matrices reused across samples."""

    def __init__(self, disc, method):
        self.disc = disc
        self.kind = field_kind(method)
        self.nl = dim_p(disc.k - 2)
        if self.kind == "wg":
            self.maps = [wg_laplacian_map(disc, K) for K in range(disc.n_cells)]
        elif self.kind == "hho":
            self.maps = [hho_reconstruction_map(disc, K) for K in range(disc.n_cells)]
        else:
            self.L = dg_laplacian_operator(disc)
        self.grams = [e.hessian_gram() for e in disc.elements]
        # (phi_i, Delta phi_j) and (Delta phi_i, Delta phi_j)
        self.mix = [(e.phi[: self.nl] * e.weights) @ e.lap.T for e in disc.elements]
        self.lap_gram = [(e.lap * e.weights) @ e.lap.T for e in disc.elements]


def norm_ratios(tables, v):
    """(gap / |v|_s, ||v||_h / N(v), N(v) / ||v||_h) for one field."""
    disc = tables.disc
    kind = tables.kind
    s = max(stab_form(disc, kind, v, v), 0.0)
    gap = 0.0
    main = 0.0
    energy = 0.0
    if kind == "dg":
        dh = (tables.L @ v.cell.ravel()).reshape(disc.n_cells, -1)
    for K in range(disc.n_cells):
        c = v.cell[K]
        lap_sq = c @ tables.lap_gram[K] @ c
        if kind == "hho":
            r = tables.maps[K] @ v.local(disc, K)
            d = r - c
            gap += d @ tables.grams[K] @ d
            main += c @ tables.grams[K] @ c
            energy += r @ tables.grams[K] @ r
            continue
        p = tables.maps[K] @ v.local(disc, K) if kind == "wg" else dh[K]
        # ||p - Delta c||^2 with p in the orthonormal P_{k-2} functions
        gap += p @ p - 2 * p @ (tables.mix[K] @ c) + lap_sq
        main += lap_sq
        energy += p @ p if kind == "wg" else lap_sq
    if kind == "dg":
        # the DG energy norm is ||Delta_pw v||^2 + |v|_s^2; compare with the Delta_h variant
        main = float(np.sum(dh**2))
        energy = energy + s
    else:
        energy = energy + s
    norm_alt = np.sqrt(main + s)
    norm_h = np.sqrt(energy)
    gap = np.sqrt(max(gap, 0.0))
    return (gap / np.sqrt(s) if s > 0 else np.inf, norm_h / norm_alt, norm_alt / norm_h)


def sample_norm_ratios(disc, method, samples=100, rng=None):
    """Array (samples, 3) of :func:`norm_ratios` over standard normal random fields."""
    rng = np.random.default_rng(rng)
    tables = NormTables(disc, method)
    out = np.empty((samples, 3))
    for i in range(samples):
        v = HybridField.random(disc, method, rng)
        out[i] = norm_ratios(tables, v)
    return out

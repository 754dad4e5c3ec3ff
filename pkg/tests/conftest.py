"""Shared test helpers: independent brute-force oracles and tiny meshes.

The oracles deliberately avoid the closed forms they are used to check:
the local plastic minimizer is found by zooming grid search, the damage QP
by exhaustive enumeration of active-set configurations, and the reduced
displacement objective by derivative-free coordinate descent.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from faultslip import tensors
from faultslip.mesh import Geometry, Mesh, make_grid


@pytest.fixture
def geometry():
    return Geometry()


@pytest.fixture
def reference_triangle():
    return Mesh(nodes=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
                triangles=np.array([[0, 1, 2]]),
                dirichlet_nodes=np.array([], dtype=int),
                neumann_edges=np.empty((0, 2), dtype=int))


def local_objective(mat, e, pi_prev, zeta, p1, p2):
    """Local incremental density at plastic strain (p1, p2), evaluated
    directly from the constitutive pieces (no return mapping)."""
    lam, mu = mat.lame(zeta)
    sy = mat.yield_stress(zeta)
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    e_el = np.stack([e[0] - p1, e[1] + p1, e[2] - p2], axis=-1)
    dens = 0.5 * lam * tensors.tr(e_el) ** 2 + mu * tensors.norm_sq(e_el)
    dpi = np.sqrt(2.0 * ((p1 - pi_prev[0]) ** 2 + (p2 - pi_prev[1]) ** 2))
    return dens + sy * dpi


def grid_search_local(mat, e, pi_prev, zeta, rounds=14, grid=41):
    """Dense grid-refined search for the local plastic minimum.

    A zooming 2-D grid (shrink 0.4 per round, which keeps the minimizer
    inside the box despite the anisotropic valley of the objective) is
    polished by a 1-D zooming grid along the segment from pi_prev toward
    the deviatoric strain: for a fixed increment norm the quadratic term
    is smallest along that direction, so the minimizer lies on the
    segment, and a 1-D convex grid minimum is always within one cell of
    the true one.
    """
    dev_e = tensors.dev(np.asarray(e, float))
    pi_prev = np.asarray(pi_prev, float)
    c = 0.5 * (pi_prev + dev_e)
    h = float(np.abs(pi_prev - dev_e).max()) * 1.5 + 1.0e-12
    c1, c2 = float(c[0]), float(c[1])
    for _ in range(rounds):
        g1 = np.linspace(c1 - h, c1 + h, grid)
        g2 = np.linspace(c2 - h, c2 + h, grid)
        v1, v2 = np.meshgrid(g1, g2)
        vals = local_objective(mat, e, pi_prev, zeta, v1, v2)
        i = np.unravel_index(np.argmin(vals), vals.shape)
        c1, c2 = float(v1[i]), float(v2[i])
        h *= 0.4
    best = float(local_objective(mat, e, pi_prev, zeta, c1, c2))
    best_p = np.array([c1, c2])

    w = dev_e - pi_prev
    s, hs = 0.5, 0.75
    for _ in range(rounds + 6):
        grid_s = np.linspace(s - hs, s + hs, grid)
        p1 = pi_prev[0] + grid_s * w[0]
        p2 = pi_prev[1] + grid_s * w[1]
        vals = local_objective(mat, e, pi_prev, zeta, p1, p2)
        i = int(np.argmin(vals))
        s = float(grid_s[i])
        hs *= 0.125
        if vals[i] < best:
            best = float(vals[i])
            best_p = np.array([p1[i], p2[i]])
    return best, best_p


def enumerate_box_qp(hessian, q, lo, hi):
    """Global minimum of a strictly convex box QP by exhausting every
    active-set configuration (lo / hi / free per variable).

    Configurations are grouped by their free pattern so each pattern is one
    multi-RHS solve over all bound-value combinations.
    """
    h = np.asarray(hessian.todense() if hasattr(hessian, "todense")
                   else hessian, dtype=float)
    q = np.asarray(q, float)
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    n = len(q)
    feas_tol = 1.0e-12 * (1.0 + np.abs(hi).max())
    best_val, best_x = np.inf, None
    for free_bits in range(2 ** n):
        free = np.array([(free_bits >> i) & 1 for i in range(n)], dtype=bool)
        nb = int((~free).sum())
        bvals = np.array(list(itertools.product((0, 1), repeat=nb)),
                         dtype=float) if nb else np.zeros((1, 0))
        bound_idx = np.flatnonzero(~free)
        xb = lo[bound_idx] + bvals * (hi[bound_idx] - lo[bound_idx])
        x = np.zeros((len(xb), n))
        x[:, bound_idx] = xb
        if free.any():
            rhs = -q[free][None, :] - xb @ h[np.ix_(bound_idx, free)]
            x[:, free] = np.linalg.solve(h[np.ix_(free, free)], rhs.T).T
        ok = np.all((x >= lo - feas_tol) & (x <= hi + feas_tol), axis=1)
        if not ok.any():
            continue
        xs = x[ok]
        vals = 0.5 * np.einsum("ri,ij,rj->r", xs, h, xs) + xs @ q
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_x = float(vals[i]), xs[i].copy()
    return best_val, np.clip(best_x, lo, hi)


def coordinate_descent(fun, x0, spans, sweeps=60, grid=21, shrink=0.35,
                       tol=0.0):
    """Derivative-free minimization: per-coordinate zooming grid search,
    swept until the objective stalls."""
    x = np.asarray(x0, float).copy()
    spans = np.asarray(spans, float).copy()
    f = fun(x)
    for _ in range(sweeps):
        f_before = f
        for i in range(len(x)):
            lo, hi = x[i] - spans[i], x[i] + spans[i]
            for _ in range(10):
                cand = np.linspace(lo, hi, grid)
                vals = np.empty(grid)
                xt = x.copy()
                for j, c in enumerate(cand):
                    xt[i] = c
                    vals[j] = fun(xt)
                j = int(np.argmin(vals))
                x[i] = cand[j]
                f = float(vals[j])
                half = shrink * (hi - lo)
                lo, hi = x[i] - half, x[i] + half
            spans[i] = max(spans[i] * 0.5, 1.0e-16)
        if f_before - f <= tol * max(abs(f), 1.0):
            break
    return x, f


def five_node_mesh(geometry=None):
    """Smallest criss-cross mesh (one cell, 5 nodes, 4 elements)."""
    return make_grid(geometry or Geometry(), 1, 1)

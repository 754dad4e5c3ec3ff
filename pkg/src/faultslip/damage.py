"""Damage step as a bound-constrained quadratic program.

The nonsmooth damage increment minimization is rewritten in split nodal
update variables z+ (healing) and z- (damaging) with zeta = zeta_prev
+ z+ - z-.  Box constraints keep zeta in [0, 1]; at the optimum no node
carries both a positive z+ and z- (subtracting the common part lowers the
objective), so complementarity is restored exactly by post-processing.
The QP is solved by projected gradient steps combined with preconditioned
conjugate-gradient sweeps on the free variables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem
from .material import MaterialModel
from .mesh import Mesh


class QPError(RuntimeError):
    """Raised when the bound-constrained QP solver fails to converge."""


@dataclass
class DamageQP:
    """Quadratic program over stacked (z+, z-) nodal vectors.

    hessian is symmetric positive semidefinite (positive definite for
    positive rate coefficients and finite time step); lower bounds are zero,
    upper bounds are (1 - zeta_prev, zeta_prev)."""

    hessian: sp.csr_matrix
    linear: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    zeta_prev: np.ndarray
    mass: np.ndarray
    tau: float


@dataclass
class DamageStepResult:
    """Solved damage step with the nodal update split, the bound
    multipliers of the [0, 1] damage constraint (diagnostic only) and the
    solver's KKT residual."""

    zeta_new: np.ndarray
    z_plus: np.ndarray
    z_minus: np.ndarray
    multipliers: np.ndarray
    kkt_residual: float
    iterations: int


def damage_hessian(mesh: Mesh, tau: float, mat: MaterialModel,
                   stiffness: sp.csr_matrix | None = None) -> sp.csr_matrix:
    """Hessian over stacked (z+, z-): gradient stiffness coupling plus the
    lumped viscous diagonals a1 m / tau and a2 m / tau."""
    if stiffness is None:
        stiffness = fem.damage_stiffness(mesh, mat.kappa)
    m = fem.lumped_mass(mesh)
    d1 = sp.diags(mat.a1 * m / tau)
    d2 = sp.diags(mat.a2 * m / tau)
    return sp.bmat([[stiffness + d1, -stiffness],
                    [-stiffness, stiffness + d2]], format="csr")


def assemble_damage_qp(mesh: Mesh, e_el: np.ndarray, zeta_prev: np.ndarray,
                       tau: float, mat: MaterialModel,
                       stiffness: sp.csr_matrix | None = None,
                       hessian: sp.csr_matrix | None = None) -> DamageQP:
    """Build the damage QP for the elastic strains of the completed
    elastoplastic step.

    The damage-derivative of the elastic energy is elementwise constant and
    distributes to nodes with area/3 weights, which integrates the affine
    integrand exactly; the stored-damage, viscous and activation terms use
    the lumped nodal mass.
    """
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if stiffness is None:
        stiffness = fem.damage_stiffness(mesh, mat.kappa)
    if hessian is None:
        hessian = damage_hessian(mesh, tau, mat, stiffness)
    m = fem.lumped_mass(mesh)
    drive = np.bincount(
        mesh.triangles.ravel(),
        weights=np.repeat(mesh.areas * mat.energy_derivative_zeta(e_el) / 3.0,
                          3),
        minlength=mesh.n_nodes)
    r = drive - mat.b1 * m + stiffness @ zeta_prev
    linear = np.concatenate([r, -r + mat.a3 * m])
    upper = np.concatenate([np.maximum(1.0 - zeta_prev, 0.0),
                            np.maximum(zeta_prev, 0.0)])
    return DamageQP(hessian=hessian, linear=linear,
                    lower=np.zeros_like(upper), upper=upper,
                    zeta_prev=np.asarray(zeta_prev, float), mass=m, tau=tau)


def objective(qp: DamageQP, x: np.ndarray) -> float:
    """QP objective value (without the z-independent energy constant)."""
    return float(0.5 * x @ (qp.hessian @ x) + qp.linear @ x)


def _projected_gradient(x, g, lo, hi):
    pg = g.copy()
    at_lo = x <= lo
    at_hi = x >= hi
    pg[at_lo] = np.minimum(g[at_lo], 0.0)
    pg[at_hi] = np.maximum(g[at_hi], 0.0)
    pg[lo >= hi] = 0.0
    return pg


def _pcg(h, b, diag, tol, max_iter):
    """Jacobi-preconditioned CG for h x = b, x0 = 0."""
    x = np.zeros_like(b)
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = float(r @ z)
    iters = 0
    for iters in range(1, max_iter + 1):
        hp = h @ p
        curv = float(p @ hp)
        if curv <= 0.0:
            break
        alpha = rz / curv
        x += alpha * p
        r -= alpha * hp
        if np.linalg.norm(r) <= tol:
            break
        z = r / diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, iters


def solve_qp(qp: DamageQP, tol_kkt: float = 1.0e-10,
             x0: np.ndarray | None = None,
             max_outer: int | None = None):
    """Solve the box-constrained QP to a projected-gradient tolerance.

    Alternates a backtracking projected-gradient step (which updates the
    active set) with a preconditioned CG sweep on the free variables,
    warm-startable through x0.  Returns (x, kkt_residual, iterations).
    """
    h, q, lo, hi = qp.hessian, qp.linear, qp.lower, qp.upper
    n = len(q)
    if max_outer is None:
        max_outer = 10 * (n // 2) + 20
    scale = 1.0 + float(np.linalg.norm(q))
    diag = np.maximum(h.diagonal(), 1.0e-300)

    x = np.zeros(n) if x0 is None else np.clip(x0, lo, hi)
    g = h @ x + q
    val = float(0.5 * x @ (g + q))
    total_iters = 0
    pgn = float(np.linalg.norm(_projected_gradient(x, g, lo, hi)))

    for _ in range(max_outer):
        if pgn <= tol_kkt * scale:
            return x, pgn, total_iters

        # projected-gradient step with Armijo backtracking along the arc
        d = -_projected_gradient(x, g, lo, hi)
        hd = h @ d
        curv = float(d @ hd)
        t = (float(d @ d) / curv) if curv > 0.0 else 1.0
        margin = 16.0 * np.finfo(float).eps * max(abs(val), 1.0)
        for _ in range(60):
            x_t = np.clip(x + t * d, lo, hi)
            g_lin = float(g @ (x_t - x))
            v_t = objective(qp, x_t)
            if v_t <= val + 0.01 * g_lin + margin:
                break
            t *= 0.5
        x, val = x_t, v_t
        g = h @ x + q
        total_iters += 1

        # CG on the face spanned by the free variables
        free = (x > lo) & (x < hi)
        if free.any():
            hff = h[free][:, free]
            b = -g[free]
            bnorm = float(np.linalg.norm(b))
            if bnorm > 0.0:
                s, cg_iters = _pcg(hff, b, diag[free],
                                   tol=max(1.0e-4 * bnorm,
                                           0.1 * tol_kkt * scale),
                                   max_iter=int(free.sum()))
                total_iters += cg_iters
                step = np.zeros(n)
                step[free] = s
                beta = 1.0
                for _ in range(60):
                    x_t = np.clip(x + beta * step, lo, hi)
                    g_lin = float(g @ (x_t - x))
                    v_t = objective(qp, x_t)
                    if v_t <= val + 0.01 * g_lin + margin:
                        break
                    beta *= 0.5
                if v_t <= val:
                    x, val = x_t, v_t
                    g = h @ x + q
        pgn = float(np.linalg.norm(_projected_gradient(x, g, lo, hi)))

    raise QPError(f"no convergence in {max_outer} sweeps "
                  f"(projected gradient {pgn:.3e}, "
                  f"target {tol_kkt * scale:.3e})")


def damage_step(mesh: Mesh, e_el: np.ndarray, zeta_prev: np.ndarray,
                tau: float, mat: MaterialModel, tol_kkt: float = 1.0e-10,
                x0: np.ndarray | None = None,
                stiffness: sp.csr_matrix | None = None,
                hessian: sp.csr_matrix | None = None) -> DamageStepResult:
    """Assemble and solve one damage step, restoring exact nodal
    complementarity and exact [0, 1] feasibility."""
    qp = assemble_damage_qp(mesh, e_el, zeta_prev, tau, mat,
                            stiffness=stiffness, hessian=hessian)
    x, kkt, iters = solve_qp(qp, tol_kkt=tol_kkt, x0=x0)
    n = mesh.n_nodes
    z_plus, z_minus = x[:n].copy(), x[n:].copy()
    common = np.minimum(z_plus, z_minus)
    z_plus -= common
    z_minus -= common
    zeta_new = np.clip(zeta_prev + z_plus - z_minus, 0.0, 1.0)
    z_plus = np.maximum(zeta_new - zeta_prev, 0.0)
    z_minus = np.maximum(zeta_prev - zeta_new, 0.0)

    # diagnostic multiplier of the [0, 1] damage constraint: nonnegative
    # where healing is blocked at 1, nonpositive where damaging is blocked
    # at 0, reported as a density
    g = qp.hessian @ x + qp.linear
    mult = np.zeros(n)
    at_one = zeta_new >= 1.0
    at_zero = zeta_new <= 0.0
    mult[at_one] = -g[:n][at_one]
    mult[at_zero] = g[n:][at_zero]
    mult /= np.maximum(qp.mass, 1.0e-300)
    return DamageStepResult(zeta_new=zeta_new, z_plus=z_plus,
                            z_minus=z_minus, multipliers=mult,
                            kkt_residual=kkt, iterations=iters)

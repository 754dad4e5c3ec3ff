"""Per-step elastoplastic minimization by return-mapping condensation.

Each time step minimizes, over displacement and trace-free plastic strain
with the damage frozen at its previous value, the elastic energy plus the
yield-stress-weighted plastic increment norm.  The plastic strain minimizer
is an elementwise shrinkage of the trial deviatoric strain onto the yield
ball, which condenses the objective into a convex C1 function of the
displacement alone; a damped Newton iteration with the algorithmic tangent
minimizes that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import fem, tensors
from .fem import LoadProgram, State
from .material import MaterialModel
from .mesh import Mesh

_TINY = 1.0e-300


class NewtonError(RuntimeError):
    """Raised when the displacement iteration fails to converge."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or []


@dataclass
class PlasticStepResult:
    """Converged elastoplastic step: nodal displacement (with Dirichlet
    values), elementwise plastic strain (m, 2) and stress (m, 3), iteration
    count, final free-gradient norm, the minimized objective value and the
    accepted objective values along the iteration."""

    u: np.ndarray
    pi: np.ndarray
    sigma: np.ndarray
    iterations: int
    residual_norm: float
    energy: float
    energy_trace: list


def local_plastic_update(e, pi_prev, zeta, mat: MaterialModel):
    """Elementwise minimization over the trace-free plastic strain.

    Parameters
    ----------
    e : (..., 3) packed total strain
    pi_prev : (..., 2) previous plastic strain as trace-free pairs
    zeta : scalar or (...,) damage

    Returns
    -------
    pi_new : (..., 2)
        Elastic branch keeps pi_prev; otherwise pi_prev is pulled toward
        the deviatoric strain until the stress sits on the yield surface.
    sigma : (..., 3)
        Stress of the elastic strain e - pi_new.
    energy : (...)
        Minimized local density: elastic energy plus the weighted plastic
        increment norm [J/m3].
    """
    e = np.asarray(e, dtype=float)
    pi_prev = np.asarray(pi_prev, dtype=float)
    lam, mu = mat.lame(zeta)
    sy = mat.yield_stress(zeta)
    t = tensors.tr(e)
    w = tensors.dev(e) - pi_prev
    wn = tensors.devnorm(w)
    trial = 2.0 * mu * wn
    plastic = trial > sy
    # on yielding elements the elastic deviator sits on the yield surface;
    # forming it from the ratio avoids cancellation at large trial stress
    ratio = np.where(plastic, sy / np.maximum(trial, _TINY), 1.0)
    d_el = ratio[..., None] * w
    pi_new = pi_prev + np.where(plastic, 1.0 - ratio, 0.0)[..., None] * w
    km = lam + mu
    sigma = np.stack([km * t + 2.0 * mu * d_el[..., 0],
                      km * t - 2.0 * mu * d_el[..., 0],
                      2.0 * mu * d_el[..., 1]], axis=-1)
    energy = (0.5 * km * t ** 2 + mu * tensors.devnorm_sq(d_el)
              + sy * np.where(plastic, 1.0 - ratio, 0.0) * wn)
    return pi_new, sigma, energy


def elastic_tangent(zeta, mat: MaterialModel) -> np.ndarray:
    """Mandel elasticity moduli (..., 3, 3) at damage zeta."""
    lam, mu = mat.lame(zeta)
    lam = np.broadcast_to(np.asarray(lam, float), np.shape(zeta))
    mu = np.broadcast_to(np.asarray(mu, float), np.shape(zeta))
    d = np.zeros(np.shape(zeta) + (3, 3))
    km = lam + mu
    d[..., 0, 0] = km + mu
    d[..., 1, 1] = km + mu
    d[..., 0, 1] = km - mu
    d[..., 1, 0] = km - mu
    d[..., 2, 2] = 2.0 * mu
    return d


def consistent_tangent(e, pi_prev, zeta, mat: MaterialModel) -> np.ndarray:
    """Algorithmic moduli (..., 3, 3) of the return-mapped stress in Mandel
    form: full elastic stiffness in the elastic branch, volumetric stiffness
    plus the tangential yield-surface stiffness in the plastic branch."""
    e = np.asarray(e, dtype=float)
    pi_prev = np.asarray(pi_prev, dtype=float)
    lam, mu = mat.lame(zeta)
    sy = mat.yield_stress(zeta)
    t_shape = e.shape[:-1]
    lam = np.broadcast_to(np.asarray(lam, float), t_shape)
    mu = np.broadcast_to(np.asarray(mu, float), t_shape)
    sy = np.broadcast_to(np.asarray(sy, float), t_shape)

    w = tensors.dev(e) - pi_prev
    wn = tensors.devnorm(w)
    plastic = 2.0 * mu * wn > sy

    km = lam + mu
    d = np.zeros(t_shape + (3, 3))
    d[..., 0, 0] = km
    d[..., 1, 1] = km
    d[..., 0, 1] = km
    d[..., 1, 0] = km

    # deviatoric projector in Mandel components
    pdev = np.array([[0.5, -0.5, 0.0], [-0.5, 0.5, 0.0], [0.0, 0.0, 1.0]])
    dev_stiff = np.where(plastic, sy / np.maximum(wn, _TINY), 2.0 * mu)
    d += dev_stiff[..., None, None] * pdev

    # remove the radial direction on yielding elements
    n_hat = np.zeros(t_shape + (3,))
    safe = np.maximum(wn, _TINY)
    n_hat[..., 0] = w[..., 0] / safe
    n_hat[..., 1] = -w[..., 0] / safe
    n_hat[..., 2] = np.sqrt(2.0) * w[..., 1] / safe
    outer = n_hat[..., :, None] * n_hat[..., None, :]
    d -= np.where(plastic, dev_stiff, 0.0)[..., None, None] * outer
    return d


def reduced_energy(mesh: Mesh, u: np.ndarray, pi_prev: np.ndarray,
                   zeta_prev: np.ndarray, loads: LoadProgram,
                   mat: MaterialModel):
    """Condensed objective of the displacement and its gradient.

    u must carry the current Dirichlet values.  Returns the objective value
    [J] and the nodal gradient (n, 2) with Dirichlet rows zeroed; the value
    map is convex and continuously differentiable in the free components.
    """
    zbar = fem.element_zeta(mesh, zeta_prev)
    value, grad, _, _ = _condensed(mesh, u, pi_prev, zbar, loads, mat)
    return value, grad


def _condensed(mesh, u, pi_prev, zbar, loads, mat):
    e = fem.total_strain(mesh, u)
    pi_new, sigma, dens = fem.chunked(
        lambda ee, pp, zz: local_plastic_update(ee, pp, zz, mat),
        mesh.n_elements, e, pi_prev, zbar)
    value = float(np.sum(mesh.areas * dens)) + fem.load_potential(
        mesh, u, loads)
    grad = fem.internal_forces(mesh, sigma) - fem.load_vector(mesh, loads)
    grad[mesh.dirichlet_nodes] = 0.0
    return value, grad, sigma, pi_new


def solve_elastoplastic_step(mesh: Mesh, mat: MaterialModel,
                             state_prev: State, loads: LoadProgram,
                             t: float, newton_tol: float = 1.0e-9,
                             max_iterations: int = 200) -> PlasticStepResult:
    """Minimize the condensed step objective by damped Newton.

    Warm-starts from the previous displacement with the time-t Dirichlet
    values written in, uses the algorithmic tangent with Armijo
    backtracking, and stops when the free-gradient norm falls below
    newton_tol relative to the warm-start residual.
    """
    zbar = fem.element_zeta(mesh, state_prev.zeta)
    pi_prev = state_prev.pi
    free = mesh.free_mask()
    u = fem.apply_dirichlet(mesh, state_prev.u, loads, t)

    value, grad, sigma, pi_new = _condensed(mesh, u, pi_prev, zbar, loads,
                                            mat)
    gnorm0 = float(np.linalg.norm(grad.ravel()[free]))
    target = newton_tol * gnorm0
    residuals = [gnorm0]
    trace = [value]
    if gnorm0 == 0.0:
        return PlasticStepResult(u, pi_new, sigma, 0, 0.0, value, trace)

    e = fem.total_strain(mesh, u)
    for it in range(1, max_iterations + 1):
        d_mod = consistent_tangent(e, pi_prev, zbar, mat)
        k = fem.tangent_matrix(mesh, d_mod)
        kff = k[free][:, free].tocsc()
        g = grad.ravel()[free]
        try:
            step = -spla.splu(kff).solve(g)
        except RuntimeError:
            step = None
        if step is None or float(g @ step) >= 0.0:
            # semismooth tangent unusable; fall back to the elastic one
            k = fem.tangent_matrix(mesh, elastic_tangent(zbar, mat))
            step = -spla.splu(k[free][:, free].tocsc()).solve(g)
        slope = float(g @ step)

        du = np.zeros(2 * mesh.n_nodes)
        du[free] = step
        du = du.reshape(-1, 2)
        alpha = 1.0
        margin = 16.0 * np.finfo(float).eps * max(abs(value), 1.0)
        while True:
            u_try = u + alpha * du
            v_try, g_try, s_try, p_try = _condensed(mesh, u_try, pi_prev,
                                                    zbar, loads, mat)
            if v_try <= value + 1.0e-4 * alpha * slope + margin:
                break
            alpha *= 0.5
            if alpha < 1.0e-14:
                if residuals[-1] <= 1.0e-5 * gnorm0:
                    # gradient already tiny; the energy no longer resolves
                    # a decrease at this scale
                    return PlasticStepResult(u, pi_new, sigma, it,
                                             residuals[-1], value, trace)
                raise NewtonError(
                    f"line search failed at iteration {it} "
                    f"(|g| = {residuals[-1]:.3e}, |g0| = {gnorm0:.3e})",
                    residuals)
        u, value, grad, sigma, pi_new = u_try, v_try, g_try, s_try, p_try
        trace.append(value)
        e = fem.total_strain(mesh, u)
        gnorm = float(np.linalg.norm(grad.ravel()[free]))
        residuals.append(gnorm)
        if gnorm <= target:
            return PlasticStepResult(u, pi_new, sigma, it, gnorm, value,
                                     trace)

    raise NewtonError(
        f"no convergence in {max_iterations} iterations "
        f"(|g| = {residuals[-1]:.3e}, target {target:.3e})", residuals)

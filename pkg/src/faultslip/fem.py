"""P1/P0 finite-element kernels on criss-cross triangle meshes.

Displacement and damage are nodal P1 fields, plastic strain and stress are
elementwise constant.  With constant strains per element, one-point
quadrature of the elastic terms is exact (the elasticity tensor is affine
in the element-average damage); the damage reaction terms use the lumped
nodal mass so box constraints stay nodal.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import tensors
from .material import MaterialModel
from .mesh import Mesh

_workers = 1


def set_workers(n: int) -> None:
    """Worker count for chunked element kernels (1 = fully sequential).

    Results are identical for any count: chunks are evaluated independently
    and concatenated in a fixed order.
    """
    global _workers
    if n < 1:
        raise ValueError("worker count must be >= 1")
    _workers = int(n)


def workers_from_env(env: str = "FAULTSLIP_WORKERS") -> int:
    raw = os.environ.get(env, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{env} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{env} must be >= 1, got {n}")
    return n


def chunked(fn, n: int, *arrays):
    """Apply an elementwise-batch kernel over row chunks and concatenate.

    `fn(*slices)` must return a tuple of arrays whose leading axis matches
    the slice length.
    """
    if _workers == 1 or n < 4 * _workers:
        return fn(*arrays)
    bounds = np.linspace(0, n, _workers + 1, dtype=int)
    slices = [tuple(a[lo:hi] for a in arrays)
              for lo, hi in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=_workers) as pool:
        parts = list(pool.map(lambda args: fn(*args), slices))
    return tuple(np.concatenate([p[i] for p in parts])
                 for i in range(len(parts[0])))


@dataclass
class State:
    """Simulation state: nodal displacement u (n, 2), elementwise trace-free
    plastic strain pi (m, 2) stored as (p11, p12) with p22 = -p11, and nodal
    damage zeta (n,) in [0, 1]."""

    u: np.ndarray
    pi: np.ndarray
    zeta: np.ndarray

    @classmethod
    def zeros(cls, mesh: Mesh, zeta=None) -> "State":
        z = np.ones(mesh.n_nodes) if zeta is None else np.asarray(zeta, float)
        return cls(u=np.zeros((mesh.n_nodes, 2)),
                   pi=np.zeros((mesh.n_elements, 2)),
                   zeta=z.copy())

    def copy(self) -> "State":
        return State(self.u.copy(), self.pi.copy(), self.zeta.copy())


@dataclass
class LoadProgram:
    """Loading: horizontal plate velocity +v on the top edge, -v on the
    bottom edge (vertical component pinned), optional constant body force
    [N/m3] and constant traction on the left/right edges [N/m2]."""

    plate_velocity: float = 1.0e-8
    body_force: tuple = (0.0, 0.0)
    traction: tuple = (0.0, 0.0)

    def dirichlet_values(self, mesh: Mesh, t: float) -> np.ndarray:
        """Prescribed displacement at mesh.dirichlet_nodes for time t."""
        y = mesh.nodes[mesh.dirichlet_nodes, 1]
        mid = 0.5 * (mesh.nodes[:, 1].min() + mesh.nodes[:, 1].max())
        sign = np.where(y > mid, 1.0, -1.0)
        vals = np.zeros((len(mesh.dirichlet_nodes), 2))
        vals[:, 0] = sign * self.plate_velocity * t
        return vals


def apply_dirichlet(mesh: Mesh, u: np.ndarray, loads: LoadProgram,
                    t: float) -> np.ndarray:
    """Return a copy of u with the time-t Dirichlet values written in."""
    out = u.copy()
    out[mesh.dirichlet_nodes] = loads.dirichlet_values(mesh, t)
    return out


def total_strain(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Elementwise small strain (e11, e22, e12) of a nodal field u (n, 2).

    Dirichlet values must already be written into u.
    """
    un = u[mesh.triangles]                                 # (m, 3, 2)
    gx = mesh.grads[:, :, 0]
    gy = mesh.grads[:, :, 1]
    e11 = np.einsum("ma,ma->m", gx, un[:, :, 0])
    e22 = np.einsum("ma,ma->m", gy, un[:, :, 1])
    e12 = 0.5 * (np.einsum("ma,ma->m", gy, un[:, :, 0])
                 + np.einsum("ma,ma->m", gx, un[:, :, 1]))
    return np.stack([e11, e22, e12], axis=-1)


def element_zeta(mesh: Mesh, zeta: np.ndarray) -> np.ndarray:
    """Element-average damage (the centroid value of the P1 field)."""
    return zeta[mesh.triangles].mean(axis=1)


def damage_stiffness(mesh: Mesh, kappa: float = 1.0) -> sp.csr_matrix:
    """Sparse P1 stiffness K with z^T K z = integral of kappa |grad z|^2."""
    ke = kappa * np.einsum("m,mad,mbd->mab", mesh.areas, mesh.grads,
                           mesh.grads)
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    k = sp.coo_matrix((ke.ravel(), (rows, cols)),
                      shape=(mesh.n_nodes, mesh.n_nodes))
    return k.tocsr()


def lumped_mass(mesh: Mesh) -> np.ndarray:
    """Nodal masses m_i = sum of adjacent element areas / 3 [m2]."""
    w = np.repeat(mesh.areas / 3.0, 3)
    return np.bincount(mesh.triangles.ravel(), weights=w,
                       minlength=mesh.n_nodes)


def internal_forces(mesh: Mesh, sigma: np.ndarray) -> np.ndarray:
    """Assemble nodal forces of an elementwise stress field (m, 3)."""
    a = mesh.areas
    gx = mesh.grads[:, :, 0]
    gy = mesh.grads[:, :, 1]
    fx = (a * sigma[:, 0])[:, None] * gx + (a * sigma[:, 2])[:, None] * gy
    fy = (a * sigma[:, 2])[:, None] * gx + (a * sigma[:, 1])[:, None] * gy
    idx = mesh.triangles.ravel()
    f = np.empty((mesh.n_nodes, 2))
    f[:, 0] = np.bincount(idx, weights=fx.ravel(), minlength=mesh.n_nodes)
    f[:, 1] = np.bincount(idx, weights=fy.ravel(), minlength=mesh.n_nodes)
    return f


def _mandel_b(mesh: Mesh) -> np.ndarray:
    """Strain-displacement matrices (m, 3, 6) mapping the 6 nodal dofs of an
    element to the Mandel strain (e11, e22, sqrt(2) e12)."""
    cached = getattr(mesh, "_mandel_b", None)
    if cached is not None:
        return cached
    m = mesh.n_elements
    b = np.zeros((m, 3, 6))
    gx = mesh.grads[:, :, 0]
    gy = mesh.grads[:, :, 1]
    s = np.sqrt(0.5)
    for a in range(3):
        b[:, 0, 2 * a] = gx[:, a]
        b[:, 1, 2 * a + 1] = gy[:, a]
        b[:, 2, 2 * a] = s * gy[:, a]
        b[:, 2, 2 * a + 1] = s * gx[:, a]
    mesh._mandel_b = b
    return b


def _element_dofs(mesh: Mesh) -> np.ndarray:
    cached = getattr(mesh, "_edofs", None)
    if cached is not None:
        return cached
    edofs = np.empty((mesh.n_elements, 6), dtype=np.int64)
    edofs[:, 0::2] = 2 * mesh.triangles
    edofs[:, 1::2] = 2 * mesh.triangles + 1
    mesh._edofs = edofs
    return edofs


def tangent_matrix(mesh: Mesh, d_mandel: np.ndarray) -> sp.csr_matrix:
    """Assemble the displacement tangent from Mandel moduli (m, 3, 3)."""
    b = _mandel_b(mesh)

    def element_blocks(areas, bloc, dloc):
        return (np.einsum("m,mia,mij,mjb->mab", areas, bloc, dloc, bloc),)

    (ke,) = chunked(element_blocks, mesh.n_elements, mesh.areas, b, d_mandel)
    edofs = _element_dofs(mesh)
    rows = np.repeat(edofs, 6, axis=1).ravel()
    cols = np.tile(edofs, (1, 6)).ravel()
    ndof = 2 * mesh.n_nodes
    return sp.coo_matrix((ke.ravel(), (rows, cols)),
                         shape=(ndof, ndof)).tocsr()


def load_vector(mesh: Mesh, loads: LoadProgram) -> np.ndarray:
    """Nodal external force vector of the body force and edge tractions."""
    f = lumped_mass(mesh)[:, None] * np.asarray(loads.body_force, float)
    traction = np.asarray(loads.traction, float)
    if np.any(traction != 0.0) and len(mesh.neumann_edges):
        p = mesh.nodes[mesh.neumann_edges]
        lengths = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
        w = np.repeat(0.5 * lengths, 2)
        for c in range(2):
            f[:, c] += traction[c] * np.bincount(
                mesh.neumann_edges.ravel(), weights=w, minlength=mesh.n_nodes)
    return f


def shifted_displacement(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """u with the Dirichlet rows zeroed (the load-potential argument)."""
    out = u.copy()
    out[mesh.dirichlet_nodes] = 0.0
    return out


def load_potential(mesh: Mesh, u: np.ndarray, loads: LoadProgram) -> float:
    """- integral of (body force . u) - boundary integral of (traction . u),
    evaluated on the shifted displacement."""
    f = load_vector(mesh, loads)
    if not f.any():
        return 0.0
    return -float(np.sum(f * shifted_displacement(mesh, u)))


def external_work_rate(mesh: Mesh, state: State, loads: LoadProgram,
                       t: float, mat: MaterialModel) -> float:
    """Instantaneous power of the boundary loading on the current state.

    Equals the reaction forces on the Dirichlet nodes contracted with the
    plate velocity; the body-force and traction terms vanish because those
    loads are constant in time.
    """
    e_el = total_strain(mesh, state.u) - tensors.full(state.pi)
    sigma = mat.stress(e_el, element_zeta(mesh, state.zeta))
    f = internal_forces(mesh, sigma)
    vel = (loads.dirichlet_values(mesh, t + 1.0)
           - loads.dirichlet_values(mesh, t))
    return float(np.sum(f[mesh.dirichlet_nodes] * vel))


def external_work_increment(mesh: Mesh, state_prev: State,
                            loads: LoadProgram, mat: MaterialModel,
                            t0: float, t1: float) -> float:
    """Work of the loading over [t0, t1] holding the state at its t0 value.

    The Dirichlet data is affine in time, so the integrand is affine too and
    the midpoint evaluation integrates it exactly: the stress of the frozen
    state at the mid-step Dirichlet extension contracted with the strain of
    the Dirichlet increment.
    """
    inc = np.zeros_like(state_prev.u)
    inc[mesh.dirichlet_nodes] = (loads.dirichlet_values(mesh, t1)
                                 - loads.dirichlet_values(mesh, t0))
    e_inc = total_strain(mesh, inc)
    if not e_inc.any():
        return 0.0
    e_el = (total_strain(mesh, state_prev.u) - tensors.full(state_prev.pi)
            + 0.5 * e_inc)
    sigma = mat.stress(e_el, element_zeta(mesh, state_prev.zeta))
    contraction = (sigma[:, 0] * e_inc[:, 0] + sigma[:, 1] * e_inc[:, 1]
                   + 2.0 * sigma[:, 2] * e_inc[:, 2])
    return float(np.sum(mesh.areas * contraction))

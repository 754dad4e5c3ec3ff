"""Fractional-step time loop with a full energy ledger.

Each step solves the elastoplastic minimization with the damage frozen,
then the damage QP with the resulting elastic strains.  Both partial
minimizations come with one-sided energy estimates (minimizer value plus
dissipation below the previous value); the loop asserts them every step and
accumulates stored energy, plastic and damage dissipation and external work
into a ledger whose residual must stay on the dissipative side and shrink
with the time step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import damage, fem, plasticity, tensors
from .config import SimulationConfig
from .fem import LoadProgram, State
from .material import MaterialModel
from .mesh import Geometry, Mesh, generate_mesh, initial_damage
from .output import LedgerRow

# estimate slacks below -ESTIMATE_TOL * scale abort the run
ESTIMATE_TOL = 1.0e-8


class SimulationError(RuntimeError):
    """A failed step; carries whatever part of the run completed."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


def von_mises(sigma) -> np.ndarray:
    """Frobenius norm of the 2-D deviatoric stress, elementwise."""
    return tensors.devnorm(tensors.dev(np.asarray(sigma, float)))


def reaction_force(mesh: Mesh, sigma: np.ndarray,
                   geometry: Geometry) -> float:
    """Area-weighted average of the von Mises stress over the elements
    whose centroid lies in the centered fault stripe."""
    y = mesh.centroids[:, 1]
    half = 0.5 * geometry.fault_stripe_height
    mask = np.abs(y - 0.5 * geometry.height) <= half
    if not mask.any():
        raise ValueError("no element centroid inside the fault stripe")
    a = mesh.areas[mask]
    return float(np.sum(a * von_mises(sigma[mask])) / np.sum(a))


def stored_energy(mesh: Mesh, state: State, loads: LoadProgram,
                  mat: MaterialModel, stiffness=None) -> float:
    """Total stored energy: elastic part at element-average damage, damage
    gradient part, stored microcrack energy and the load potential [J]."""
    if stiffness is None:
        stiffness = fem.damage_stiffness(mesh, mat.kappa)
    e_el = fem.total_strain(mesh, state.u) - tensors.full(state.pi)
    zbar = fem.element_zeta(mesh, state.zeta)
    elastic = float(np.sum(mesh.areas
                           * mat.elastic_energy_density(e_el, zbar)))
    gradient = 0.5 * float(state.zeta @ (stiffness @ state.zeta))
    stored_damage = -mat.b1 * float(fem.lumped_mass(mesh) @ state.zeta)
    return (elastic + gradient + stored_damage
            + fem.load_potential(mesh, state.u, loads))


def rupture_step(reaction: np.ndarray) -> int | None:
    """First step (1-based) where the reaction force drops below half of
    its running peak; None if no such drop occurs."""
    peak = 0.0
    for k, r in enumerate(np.asarray(reaction, float), start=1):
        if peak > 0.0 and r <= 0.5 * peak:
            return k
        peak = max(peak, r)
    return None


@dataclass
class StepReport:
    state: State
    sigma: np.ndarray
    stored_energy_J: float
    plastic_increment_J: float
    damage_increment_J: float
    work_increment_J: float
    plastic_slack_J: float
    damage_slack_J: float
    yield_excess_Pa: float
    newton_iters: int
    qp_iters: int
    qp_warm_start: np.ndarray


@dataclass
class RunResult:
    config: SimulationConfig
    mesh: Mesh
    rows: list[LedgerRow] = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    final_state: State | None = None
    final_sigma: np.ndarray | None = None
    plastic_slack: list[float] = field(default_factory=list)
    damage_slack: list[float] = field(default_factory=list)
    max_von_mises: list[float] = field(default_factory=list)
    yield_excess: list[float] = field(default_factory=list)
    initial_energy_J: float = 0.0

    @property
    def material(self) -> MaterialModel:
        return self.config.material

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def step(mesh: Mesh, mat: MaterialModel,
         loads: LoadProgram, state_prev: State, t: float, tau: float,
         newton_tol: float = 1.0e-9, newton_max_iter: int = 200,
         qp_tol: float = 1.0e-10, stiffness=None, hessian=None,
         qp_x0=None) -> StepReport:
    """One fractional step from t - tau to t, with the per-step energy
    estimates of both partial minimizations checked."""
    if stiffness is None:
        stiffness = fem.damage_stiffness(mesh, mat.kappa)
    zeta_prev = state_prev.zeta
    warm = State(fem.apply_dirichlet(mesh, state_prev.u, loads, t),
                 state_prev.pi, zeta_prev)
    e_warm = stored_energy(mesh, warm, loads, mat, stiffness)

    plastic = plasticity.solve_elastoplastic_step(
        mesh, mat, state_prev, loads, t, newton_tol=newton_tol,
        max_iterations=newton_max_iter)
    zbar_prev = fem.element_zeta(mesh, zeta_prev)
    dpi = tensors.devnorm(plastic.pi - state_prev.pi)
    plastic_inc = float(np.sum(mesh.areas * mat.yield_stress(zbar_prev)
                               * dpi))
    mid = State(plastic.u, plastic.pi, zeta_prev)
    e_mid = stored_energy(mesh, mid, loads, mat, stiffness)
    scale = max(1.0, abs(e_warm), abs(e_mid))
    plastic_slack = e_warm - e_mid - plastic_inc
    if plastic_slack < -ESTIMATE_TOL * scale:
        raise SimulationError(
            f"elastoplastic energy estimate violated at t = {t:g} s "
            f"(slack {plastic_slack:.3e} J, scale {scale:.3e} J)")

    e_el = fem.total_strain(mesh, plastic.u) - tensors.full(plastic.pi)
    dmg = damage.damage_step(mesh, e_el, zeta_prev, tau, mat,
                             tol_kkt=qp_tol, x0=qp_x0, stiffness=stiffness,
                             hessian=hessian)
    new_state = State(plastic.u, plastic.pi, dmg.zeta_new)
    e_new = stored_energy(mesh, new_state, loads, mat, stiffness)
    rates = (dmg.zeta_new - zeta_prev) / tau
    damage_inc = tau * float(fem.lumped_mass(mesh)
                             @ mat.dissipation_rate_hat(rates))
    scale = max(scale, abs(e_new))
    damage_slack = e_mid - e_new - damage_inc
    if damage_slack < -ESTIMATE_TOL * scale:
        raise SimulationError(
            f"damage energy estimate violated at t = {t:g} s "
            f"(slack {damage_slack:.3e} J, scale {scale:.3e} J)")

    work_inc = fem.external_work_increment(mesh, state_prev, loads, mat,
                                           t - tau, t)
    excess = float((von_mises(plastic.sigma)
                    - mat.yield_stress(zbar_prev)).max())
    return StepReport(
        state=new_state, sigma=plastic.sigma, stored_energy_J=e_new,
        plastic_increment_J=plastic_inc, damage_increment_J=damage_inc,
        work_increment_J=work_inc, plastic_slack_J=plastic_slack,
        damage_slack_J=damage_slack, yield_excess_Pa=excess,
        newton_iters=plastic.iterations, qp_iters=dmg.iterations,
        qp_warm_start=np.concatenate([dmg.z_plus, dmg.z_minus]))


def run(cfg: SimulationConfig) -> RunResult:
    """Run the configured simulation and build the energy ledger.

    Steps are equidistant unless cfg.adaptive is set, in which case the
    time step halves whenever the per-step balance gap exceeds
    cfg.adaptive_gap_max_J and doubles when it stays below a quarter of it.
    On a failed step the partial result is attached to the raised
    SimulationError.
    """
    fem.set_workers(cfg.workers)
    mesh = generate_mesh(cfg.geometry, cfg.level)
    mat = cfg.material
    loads = cfg.loads
    stiffness = fem.damage_stiffness(mesh, mat.kappa)
    hessians = {}

    state = State.zeros(mesh, initial_damage(mesh, cfg.geometry))
    result = RunResult(config=cfg, mesh=mesh)
    e0 = stored_energy(mesh, state, loads, mat, stiffness)
    result.initial_energy_J = e0

    cum_p = cum_d = cum_w = 0.0
    qp_x0 = None
    tau = cfg.tau_s
    tau_max = cfg.adaptive_tau_max_s if cfg.adaptive_tau_max_s > 0 else tau
    t = 0.0
    k = 0
    e_prev = e0
    sigma = np.zeros((mesh.n_elements, 3))

    snap_every = 0
    if cfg.snapshot_stride_s > 0:
        snap_every = max(1, int(round(cfg.snapshot_stride_s / cfg.tau_s)))

    while True:
        if cfg.adaptive:
            if t >= cfg.t_end_s - 1.0e-9 * cfg.t_end_s:
                break
            tau = min(tau, cfg.t_end_s - t)
        elif k >= cfg.n_steps:
            break
        t_next = (k + 1) * cfg.tau_s if not cfg.adaptive else t + tau
        if tau not in hessians:
            hessians[tau] = damage.damage_hessian(mesh, tau, mat, stiffness)
        try:
            rep = step(mesh, mat, loads, state, t_next, tau,
                       newton_tol=cfg.newton_tol,
                       newton_max_iter=cfg.newton_max_iter,
                       qp_tol=cfg.qp_tol, stiffness=stiffness,
                       hessian=hessians[tau], qp_x0=qp_x0)
        except (plasticity.NewtonError, damage.QPError,
                SimulationError) as exc:
            raise SimulationError(f"step {k + 1} failed: {exc}",
                                  partial=result) from exc

        gap = (rep.work_increment_J - (rep.stored_energy_J - e_prev)
               - rep.plastic_increment_J - rep.damage_increment_J)
        if (cfg.adaptive and gap > cfg.adaptive_gap_max_J
                and tau * 0.5 >= cfg.adaptive_tau_min_s):
            tau *= 0.5
            continue

        k += 1
        t = t_next
        state = rep.state
        sigma = rep.sigma
        e_prev = rep.stored_energy_J
        qp_x0 = rep.qp_warm_start
        cum_p += rep.plastic_increment_J
        cum_d += rep.damage_increment_J
        cum_w += rep.work_increment_J
        residual = rep.stored_energy_J + cum_p + cum_d - e0 - cum_w
        result.rows.append(LedgerRow(
            step=k, time_s=t, stored_energy_J=rep.stored_energy_J,
            plastic_diss_cum_J=cum_p, damage_diss_cum_J=cum_d,
            external_work_cum_J=cum_w, balance_residual_J=residual,
            reaction_force_Pa=reaction_force(mesh, sigma, cfg.geometry),
            min_zeta=float(state.zeta.min()),
            max_plastic_norm=float(tensors.devnorm(state.pi).max()),
            newton_iters=rep.newton_iters, qp_iters=rep.qp_iters))
        result.plastic_slack.append(rep.plastic_slack_J)
        result.damage_slack.append(rep.damage_slack_J)
        result.max_von_mises.append(float(von_mises(sigma).max()))
        result.yield_excess.append(rep.yield_excess_Pa)
        if snap_every and k % snap_every == 0:
            result.snapshots[k] = (state.copy(), sigma.copy())
        if cfg.adaptive and gap < 0.25 * cfg.adaptive_gap_max_J:
            tau = min(2.0 * tau, tau_max)

    result.final_state = state
    result.final_sigma = sigma
    return result


def run_convergence(cfg: SimulationConfig, taus) -> list:
    """Run the same setup for several time steps (for the balance-gap
    convergence study); returns [(tau, RunResult), ...]."""
    from .config import with_tau
    return [(tau, run(with_tau(cfg, tau))) for tau in taus]


def run_sweep(cfg: SimulationConfig, a2_values) -> list:
    """Run the same setup for several damage viscosities; returns
    [(a2, RunResult), ...]."""
    from .config import with_a2
    return [(a2, run(with_a2(cfg, a2))) for a2 in a2_values]

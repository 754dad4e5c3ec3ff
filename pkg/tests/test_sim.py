import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from faultslip import fem, sim
from faultslip.config import default_config, with_tau
from faultslip.fem import LoadProgram, State
from faultslip.material import MaterialModel
from faultslip.mesh import Geometry, generate_mesh, make_grid
from faultslip.sim import (SimulationError, reaction_force, run,
                           rupture_step, stored_energy, von_mises)


@pytest.fixture
def mat():
    return MaterialModel()


def small_config(**overrides):
    cfg = default_config()
    base = dict(level=0, t_end_s=20.0e3, snapshot_stride_s=0.0)
    base.update(overrides)
    return dataclasses.replace(cfg, **base)


def test_stored_energy_zero_state_intact(geometry, mat):
    mesh = generate_mesh(geometry, 0)
    state = State.zeros(mesh)
    e = stored_energy(mesh, state, LoadProgram(plate_velocity=0.0), mat)
    assert_allclose(e, -mat.b1 * 40000.0, rtol=1e-12)
    assert_allclose(e, -40.0, rtol=1e-12)


def test_stored_energy_uniform_strain(geometry, mat):
    mesh = generate_mesh(geometry, 0)
    state = State.zeros(mesh)
    a = np.array([[1.1e-5, 0.4e-5], [0.4e-5, -0.7e-5]])
    state.u = mesh.nodes @ a.T
    e_pack = np.array([a[0, 0], a[1, 1], a[0, 1]])
    expected = (40000.0 * mat.elastic_energy_density(e_pack, 1.0) - 40.0)
    e = stored_energy(mesh, state, LoadProgram(plate_velocity=0.0), mat)
    assert_allclose(e, expected, rtol=1e-11)


def test_stored_energy_constant_damage_shift(geometry, mat):
    mesh = generate_mesh(geometry, 0)
    rng = np.random.default_rng(31)
    loads = LoadProgram(plate_velocity=0.0)
    state = State.zeros(mesh, zeta=np.full(mesh.n_nodes, 0.9))
    state.u = rng.normal(scale=1e-5, size=(mesh.n_nodes, 2))
    state.pi = rng.normal(scale=1e-5, size=(mesh.n_elements, 2))
    c = -0.2
    shifted = State(state.u, state.pi, state.zeta + c)
    e1 = stored_energy(mesh, state, loads, mat)
    e2 = stored_energy(mesh, shifted, loads, mat)
    e_el = fem.total_strain(mesh, state.u) - np.stack(
        [state.pi[:, 0], -state.pi[:, 0], state.pi[:, 1]], axis=-1)
    elastic_change = c * np.sum(mesh.areas
                                * mat.energy_derivative_zeta(e_el))
    assert_allclose(e2 - e1, -mat.b1 * 40000.0 * c + elastic_change,
                    rtol=1e-10)


def test_von_mises_closed_forms():
    assert von_mises(np.array([3.0e5, 3.0e5, 0.0])) == 0.0
    s = 2.4e5
    assert_allclose(von_mises(np.array([0.0, 0.0, s])), s * np.sqrt(2.0))
    rng = np.random.default_rng(32)
    sigma = rng.normal(scale=1e5, size=(20, 3))
    shifted = sigma + np.array([1.0, 1.0, 0.0]) * 7.7e4
    assert_allclose(von_mises(shifted), von_mises(sigma), rtol=1e-9)


def test_reaction_force_uniform_stress(geometry):
    mesh = generate_mesh(geometry, 0)
    sigma = np.tile([1.0e5, -2.0e5, 0.5e5], (mesh.n_elements, 1))
    assert_allclose(reaction_force(mesh, sigma, geometry),
                    von_mises(sigma[0]), rtol=1e-12)
    assert reaction_force(mesh, np.zeros((mesh.n_elements, 3)),
                          geometry) == 0.0


def test_reaction_force_weighted_average(geometry):
    mesh = make_grid(geometry, 1, 5)   # rows of height 20 m
    sigma = np.zeros((mesh.n_elements, 3))
    stripe = np.abs(mesh.centroids[:, 1] - 50.0) <= 10.0
    sigma[stripe, 2] = 1.0e5
    first = np.flatnonzero(stripe)[0]
    sigma[first, 2] = 3.0e5
    a = mesh.areas[stripe]
    vm = von_mises(sigma[stripe])
    assert_allclose(reaction_force(mesh, sigma, geometry),
                    np.sum(a * vm) / np.sum(a), rtol=1e-12)


def test_reaction_force_empty_stripe_raises():
    geom = Geometry(damaged_stripe_height=1.0, fault_stripe_height=2.0)
    mesh = make_grid(geom, 1, 2)   # centroids at 25 and 75, stripe misses
    with pytest.raises(ValueError):
        reaction_force(mesh, np.zeros((mesh.n_elements, 3)), geom)


def test_rupture_step_detection():
    assert rupture_step(np.array([1.0, 2.0, 3.0, 1.4, 1.2])) == 4
    assert rupture_step(np.array([1.0, 2.0, 3.0, 1.6])) is None
    assert rupture_step(np.zeros(5)) is None
    assert rupture_step(np.array([5.0, 2.4])) == 2


def test_zero_velocity_step_is_identity(geometry, mat):
    mesh = generate_mesh(geometry, 0)
    loads = LoadProgram(plate_velocity=0.0)
    state = State.zeros(mesh)
    rep = sim.step(mesh, mat, loads, state, t=1.0e3, tau=1.0e3)
    assert np.array_equal(rep.state.u, state.u)
    assert np.array_equal(rep.state.zeta, state.zeta)
    assert rep.plastic_increment_J == 0.0
    assert rep.damage_increment_J == 0.0
    assert rep.work_increment_J == 0.0
    assert rep.newton_iters == 0


def test_single_elastic_step_balance(geometry, mat):
    # one small step from rest: no dissipation, energy below work by at
    # most the (second-order) relaxation of the boundary increment
    mesh = generate_mesh(geometry, 0)
    loads = LoadProgram(plate_velocity=1.0e-8)
    state = State.zeros(mesh)
    tau = 1.0e3
    e0 = stored_energy(mesh, state, loads, mat)
    rep = sim.step(mesh, mat, loads, state, t=tau, tau=tau)
    assert rep.plastic_increment_J == 0.0
    assert rep.damage_increment_J == 0.0
    residual = rep.stored_energy_J - e0 - rep.work_increment_J
    assert residual <= 1e-10 * max(abs(e0), 1.0)
    assert abs(residual) <= rep.work_increment_J


def test_per_step_estimates_hold_on_short_run():
    res = run(small_config(t_end_s=30.0e3))
    e_scale = max(1.0, np.abs(res.column("stored_energy_J")).max())
    assert min(res.plastic_slack) >= -1e-8 * e_scale
    assert min(res.damage_slack) >= -1e-8 * e_scale
    # one-sided balance at every step
    assert res.column("balance_residual_J").max() <= 1e-7 * e_scale


def test_cumulative_quantities_monotone():
    res = run(small_config(t_end_s=30.0e3))
    for name in ("plastic_diss_cum_J", "damage_diss_cum_J"):
        cum = res.column(name)
        assert np.all(np.diff(np.concatenate([[0.0], cum])) >= 0.0)
    assert np.all(np.diff(res.column("step")) == 1)
    assert_allclose(res.column("time_s"),
                    res.column("step") * res.config.tau_s, rtol=1e-15)


def test_run_is_deterministic():
    r1 = run(small_config(t_end_s=10.0e3))
    r2 = run(small_config(t_end_s=10.0e3))
    assert r1.rows == r2.rows
    assert np.array_equal(r1.final_state.u, r2.final_state.u)
    assert np.array_equal(r1.final_state.zeta, r2.final_state.zeta)


def test_snapshots_recorded_at_stride():
    res = run(small_config(t_end_s=10.0e3, snapshot_stride_s=4.0e3))
    assert sorted(res.snapshots) == [4, 8]
    state, sigma = res.snapshots[4]
    assert state.u.shape == (res.mesh.n_nodes, 2)
    assert sigma.shape == (res.mesh.n_elements, 3)


def test_balance_gap_shrinks_with_tau():
    cfg = small_config(t_end_s=40.0e3)
    gaps = []
    for tau in (10.0e3, 5.0e3, 2.0e3):
        res = run(with_tau(cfg, tau))
        gaps.append(abs(res.rows[-1].balance_residual_J))
    assert gaps[0] > gaps[1] > gaps[2]


def test_adaptive_mode_reaches_end_and_controls_gap():
    cfg = small_config(t_end_s=20.0e3, adaptive=True,
                       adaptive_gap_max_J=1.0, adaptive_tau_min_s=250.0)
    res = run(cfg)
    assert_allclose(res.rows[-1].time_s, 20.0e3, rtol=1e-12)
    dt = np.diff(np.concatenate([[0.0], res.column("time_s")]))
    assert dt.min() < cfg.tau_s  # the controller actually refined
    fixed = run(small_config(t_end_s=20.0e3))
    assert abs(res.rows[-1].balance_residual_J) \
        < abs(fixed.rows[-1].balance_residual_J)


def test_failed_step_carries_partial_result():
    cfg = small_config(t_end_s=3.0e3, newton_max_iter=1)
    cfg = dataclasses.replace(
        cfg, loads=LoadProgram(plate_velocity=1.0e-3),
        geometry=Geometry(damaged_stripe_height=20.0))
    with pytest.raises(SimulationError) as err:
        run(cfg)
    assert err.value.partial is not None


def test_yield_excess_tracked():
    res = run(small_config(t_end_s=10.0e3))
    assert len(res.yield_excess) == 10
    assert max(res.yield_excess) <= 1e-6 * res.material.sigma_y1


def test_study_drivers():
    cfg = small_config(t_end_s=8.0e3)
    conv = sim.run_convergence(cfg, [4.0e3, 1.0e3])
    assert [tau for tau, _ in conv] == [4.0e3, 1.0e3]
    assert len(conv[0][1].rows) == 2 and len(conv[1][1].rows) == 8
    sweep = sim.run_sweep(cfg, [10.0e6, 1.0e3])
    assert [a2 for a2, _ in sweep] == [10.0e6, 1.0e3]
    assert sweep[1][1].material.a2 == 1.0e3

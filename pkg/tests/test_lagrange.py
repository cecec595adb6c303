import math

import numpy as np
import pytest

from app.lagrange import (
    AnalyticSampler,
    DesynchronizedError,
    FieldSampler,
    InsufficientHistoryError,
    LagrangianMap,
    MapFoldingError,
    advance_map,
    cofactor_divergence,
    euler_lagrange_residual,
    lagrangian_densities,
    map_geometry,
    map_reconstruct,
    position_gradient,
    reconstruction_mismatch,
    sync_map,
)
from app.numerics import DiffOps, Grid, PeriodicInterpolator
from app.solver import RK4Stepper, fixed_step, mhd_rhs, stable_dt
from app.thermo import PolytropicEos

from .conftest import orszag_tang_state
from .test_solver import uniform_state


def shear_velocity(points, t):
    return np.stack([np.sin(points[1]), np.zeros_like(points[1]), np.zeros_like(points[1])])


def shear_gradient(points, t):
    G = np.zeros((3, 3) + points.shape[1:])
    G[0, 1] = np.cos(points[1])
    return G


def shear_map(grid, ot_state, t_end=0.5, steps=5):
    lmap = LagrangianMap.from_state(ot_state)
    dt = t_end / steps
    for k in range(steps):
        lmap = advance_map(lmap, AnalyticSampler(shear_velocity, shear_gradient, k * dt, dt), dt)
    return lmap


def test_identity_at_start(ot_state):
    lmap = LagrangianMap.from_state(ot_state)
    np.testing.assert_array_equal(lmap.positions, ot_state.grid.coords())
    geometry = map_geometry(lmap)
    np.testing.assert_array_equal(geometry.J, 1.0)


def test_shear_map_is_exact(grid, ot_state):
    lmap = shear_map(grid, ot_state)
    x0 = grid.coords()
    np.testing.assert_allclose(lmap.positions[0], x0[0] + 0.5 * np.sin(x0[1]), atol=1e-12)
    np.testing.assert_allclose(lmap.F[0, 1], 0.5 * np.cos(x0[1]), atol=1e-12)
    np.testing.assert_allclose(map_geometry(lmap).J, 1.0, atol=1e-12)
    assert lmap.t == pytest.approx(0.5)


def test_position_gradient_matches_F(grid, ops, ot_state):
    lmap = shear_map(grid, ot_state)
    assert np.max(np.abs(position_gradient(lmap, ops) - lmap.F)) < 1e-3


def test_shear_cofactor_divergence_vanishes(grid, ops, ot_state):
    lmap = shear_map(grid, ot_state)
    assert np.max(np.abs(cofactor_divergence(map_geometry(lmap), ops))) < 1e-13


def test_folding_detected(ot_state):
    lmap = LagrangianMap.from_state(ot_state)
    lmap.F[0, 0, 3, 5, 0] = -1.0
    with pytest.raises(MapFoldingError) as info:
        map_geometry(lmap)
    assert info.value.location == (3, 5, 0)


def test_sync_rejects_other_time(ot_state, eos, ops, interp):
    lmap = LagrangianMap.from_state(ot_state)
    lmap.t = 0.1
    with pytest.raises(DesynchronizedError):
        sync_map(lmap, ot_state, mhd_rhs(ot_state, eos, ops), ops, interp)


def test_field_sampler_needs_four_stages(ot_state, ops, interp):
    with pytest.raises(InsufficientHistoryError):
        FieldSampler([ot_state], ops, interp)


def test_unsynced_map_has_no_velocity(ot_state):
    with pytest.raises(InsufficientHistoryError):
        LagrangianMap.from_state(ot_state).require_sync()


def coupled_run(n, t_end=0.05):
    grid = Grid(n, n, 1)
    ops = DiffOps(grid)
    interp = PeriodicInterpolator(grid, 3)
    eos = PolytropicEos()
    state = orszag_tang_state(grid, eos)
    stepper = RK4Stepper(eos, ops)
    lmap = LagrangianMap.from_state(state)
    dt = fixed_step(t_end, stable_dt(state, eos, 0.3))
    for _ in range(int(round(t_end / dt))):
        new_state = stepper.step(state, dt)
        lmap = advance_map(lmap, FieldSampler(stepper.stages, ops, interp), dt)
        state = new_state
    lmap = sync_map(lmap, state, mhd_rhs(state, eos, ops), ops, interp)
    return state, lmap, eos, ops, interp


def test_reconstruction_converges():
    errors = []
    for n in (16, 32):
        state, lmap, eos, ops, interp = coupled_run(n)
        recon = map_reconstruct(lmap, map_geometry(lmap))
        mismatch = reconstruction_mismatch(recon, lmap, state, interp)
        errors.append(np.max(np.abs(mismatch["rho"])))
    assert errors[1] < errors[0] / 4


def test_label_density_consistency():
    state, lmap, eos, ops, interp = coupled_run(16)
    densities = lagrangian_densities(lmap, map_geometry(lmap), eos)
    scale = np.max(np.abs(densities["ell0"]))
    assert densities["consistency"] <= 1e-12 * scale


@pytest.mark.slow
def test_euler_lagrange_residual_converges_after_evolution():
    """耦合推进后实测 E 随网格加密以约 4 阶趋于零"""
    errors = []
    for n in (16, 32):
        state, lmap, eos, ops, interp = coupled_run(n)
        E = euler_lagrange_residual(lmap, map_geometry(lmap), eos, ops)
        errors.append(np.max(np.abs(E)))
    assert lmap.t > 0
    assert math.log2(errors[0] / errors[1]) >= 3.0


def test_euler_lagrange_vanishes_for_uniform_state(grid, eos, ops, interp):
    state = uniform_state(grid)
    lmap = sync_map(LagrangianMap.from_state(state), state, mhd_rhs(state, eos, ops), ops, interp)
    E = euler_lagrange_residual(lmap, map_geometry(lmap), eos, ops)
    assert np.max(np.abs(E)) < 1e-13

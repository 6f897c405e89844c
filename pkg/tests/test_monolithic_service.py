"""Tests for condensation, multiplier recovery and the Newton step."""
import dataclasses

import numpy as np
import pytest

from dualfsi.core.exceptions import ConsistencyError, InvalidConfigError, NonConvergenceError
from dualfsi.models.boundary import DirichletSet
from dualfsi.models.system import Increments
from dualfsi.schemas.case import CaseConfig
from dualfsi.schemas.schemes import TractionInterpolation
from dualfsi.services.case_service import case_service
from dualfsi.services.linalg_service import linalg_service
from dualfsi.services.monolithic_service import MonolithicSolver, monolithic_service
from dualfsi.services.structure_service import StructureField, structure_service

EQUIVALENCE_TOL = 1e-8


def _config(data, **updates):
    merged = {**data, **updates}
    return CaseConfig.model_validate(merged)


def _column(data, master, kind, **updates):
    drive = {**data["drive"], "kind": kind}
    return _config(data, master=master, drive=drive, **updates)


def _rest_cavity_config():
    return CaseConfig.model_validate(
        {
            "case": "driven_cavity",
            "cavity": {"n_cav": 1, "n_top": 1, "n_solid_x": 2, "n_solid_y": 1},
            "lid": {"amplitude": 0.0},
            "dt": 0.01,
            "t_end": 0.01,
        }
    )


INCREMENT_NAMES = ("d_I", "d_G", "u_I", "u_G", "g_I", "g_G")


def _small_cavity_config(**updates):
    data = {
        "case": "driven_cavity",
        "cavity": {"n_cav": 1, "n_top": 1, "n_solid_x": 2, "n_solid_y": 1},
        "dt": 0.01,
        "t_end": 0.01,
        "linear_solver": {"method": "dense_lu"},
    }
    return CaseConfig.model_validate({**data, **updates})


def _increments(sizes, x):
    parts, start = {}, 0
    for name in INCREMENT_NAMES:
        parts[name] = x[start:start + sizes[name]]
        start += sizes[name]
    return Increments(**parts)


def _saddle_residual(solver, states, base, trial):
    """Field residuals with the constraint and closure rows taken relative to `base`."""
    bs = solver.assemble(*states, trial, first_iter=False)
    r = bs.residuals
    c_s, c_f, tau = bs.mortar.c_structure, bs.mortar.c_fluid, bs.tau
    s_g = solver.structure.dofmap.interface_dofs
    f_g = solver.fluid.dofmap.interface_dofs
    g_g = solver.ale.dofmap.interface_dofs
    dd = trial.d[s_g] - base.d[s_g]
    du = trial.up[f_g] - base.up[f_g]
    dgg = trial.dg[g_g] - base.dg[g_g]
    closure = tau * du - dgg if solver.master == "fluid" else c_s @ dd - c_f @ dgg
    return np.concatenate(
        [r["rS_I"], r["rS_G"], r["rF_I"], r["rF_G"], r["rG_I"], -(c_s @ dd) + tau * (c_f @ du), closure]
    )


def _perturbed_problem(config, rng, scale):
    """Solver, old states and a randomly displaced trial state of the first step."""
    setup = case_service.build_problem(config)
    solver = setup.solver
    solid = structure_service.predict_solid(setup.solid, config.predictor, config.dt)
    states = (solid, setup.fluid, setup.lam)
    start = solver.initial_trial(solid, setup.fluid)
    sizes = solver.assemble(*states, start, first_iter=False).sizes
    n_inc = sum(sizes[name] for name in INCREMENT_NAMES)
    trial = solver.update_trial(start, _increments(sizes, scale * rng.standard_normal(n_inc)))
    return solver, states, trial, sizes, n_inc


def _saddle_jacobians(config, rng, eps=1e-6):
    """Assembled increment columns of the saddle matrix and their central differences."""
    solver, states, base, sizes, n_inc = _perturbed_problem(config, rng, 1e-2)
    jac = monolithic_service.build_saddle_system(solver.assemble(*states, base, first_iter=False))
    jac = jac.matrix.toarray()[:, :n_inc]
    fd = np.empty_like(jac)
    for j in range(n_inc):
        step = np.zeros(n_inc)
        step[j] = eps
        plus = _saddle_residual(solver, states, base, solver.update_trial(base, _increments(sizes, step)))
        minus = _saddle_residual(solver, states, base, solver.update_trial(base, _increments(sizes, -step)))
        fd[:, j] = (plus - minus) / (2.0 * eps)
    return jac, fd, sizes, n_inc


def _second_step_system(config):
    """BlockSystem of the first iteration of step 2, after one converged step."""
    setup = case_service.build_problem(config)
    solver = setup.solver
    first = solver.newton_solve_step(setup.solid, setup.fluid, setup.lam)
    solid = structure_service.predict_solid(first.solid, config.predictor, config.dt)
    trial = solver.initial_trial(solid, first.fluid)
    bs = solver.assemble(solid, first.fluid, first.lam, trial, first_iter=True)
    return solver, solid, first, trial, bs


def _assert_matches_saddle(bs):
    system = monolithic_service.condense(bs)
    x = linalg_service.dense_lu_solve(system.matrix, system.rhs)
    inc = monolithic_service.expand_increments(bs, system, x)
    saddle_inc, saddle_lam = monolithic_service.solve_saddle(bs)

    assert monolithic_service.relative_difference(saddle_inc.stacked(), inc.stacked()) <= EQUIVALENCE_TOL
    recovered = monolithic_service.recover_lambda(bs, saddle_inc)
    assert monolithic_service.relative_difference(saddle_lam, recovered) <= EQUIVALENCE_TOL
    return inc


MASTER_DRIVES = [("structure", "rigid_block"), ("structure", "dry_end"), ("fluid", "dry_end")]


@pytest.mark.parametrize("master,kind", MASTER_DRIVES)
@pytest.mark.parametrize("predictor", ["const_dis", "const_vel", "const_acc"])
def test_condensed_matches_saddle(column_config_data, master, kind, predictor):
    """Test condensed and uncondensed increments on the first and a later iteration."""
    config = _column(column_config_data, master, kind, predictor=predictor)
    solver, solid, first, trial, bs = _second_step_system(config)

    inc = _assert_matches_saddle(bs)
    later = solver.assemble(solid, first.fluid, first.lam, solver.update_trial(trial, inc), first_iter=False)
    _assert_matches_saddle(later)


@pytest.mark.parametrize("master,kind", MASTER_DRIVES)
@pytest.mark.parametrize(
    "fluid_scheme",
    [
        {"kind": "gen_alpha", "rho_inf": 0.5},
        {"kind": "gen_alpha", "rho_inf": 1.0},
        {"kind": "one_step_theta", "theta": 1.0},
    ],
)
@pytest.mark.parametrize("conversion", ["trapezoidal", "backward_euler"])
def test_condensed_matches_saddle_across_schemes(column_config_data, master, kind, fluid_scheme, conversion):
    """Test the equivalence for different interpolation factors and conversion rules."""
    config = _column(
        column_config_data, master, kind, predictor="const_vel", fluid_scheme=fluid_scheme, conversion=conversion
    )
    _, _, _, _, bs = _second_step_system(config)

    _assert_matches_saddle(bs)


@pytest.mark.parametrize("case", ["column_fluid_master", "cavity"])
def test_saddle_jacobian_matches_finite_differences(column_config_data, case, rng):
    """Test every increment column of the uncondensed matrix against central differences."""
    if case == "cavity":
        config = _small_cavity_config()
    else:
        config = _column(column_config_data, "fluid", "dry_end")
    jac, fd, sizes, n_inc = _saddle_jacobians(config, rng)

    assert np.abs(fd - jac).max() <= 1e-5 * max(1.0, np.abs(jac).max())
    # shape derivatives and grid coupling are part of the check
    n = sizes
    fluid_rows = slice(n["d_I"] + n["d_G"], n["d_I"] + n["d_G"] + n["u_I"] + n["u_G"])
    grid_cols = slice(n_inc - n["g_I"] - n["g_G"], n_inc)
    assert np.abs(jac[fluid_rows, grid_cols]).max() > 0.0


def test_dropped_shape_derivatives_leave_an_inexact_jacobian(rng):
    """Test that dropping F^G is visible against the finite-difference Jacobian."""
    config = _small_cavity_config(stabilization={"drop_shape_derivatives": True})

    jac, fd, n, n_inc = _saddle_jacobians(config, rng)

    fluid_rows = slice(n["d_I"] + n["d_G"], n["d_I"] + n["d_G"] + n["u_I"] + n["u_G"])
    grid_cols = slice(n_inc - n["g_I"] - n["g_G"], n_inc)
    assert not jac[fluid_rows, grid_cols].any()
    assert np.abs(fd[fluid_rows, grid_cols]).max() > 1e-6


def test_newton_converges_superlinearly(rng):
    """Test that the residual contraction improves every iteration from a perturbed start."""
    solver, states, trial, _, _ = _perturbed_problem(_small_cavity_config(), rng, 1e-2)
    history = []
    for _ in range(8):
        bs = solver.assemble(*states, trial, first_iter=False)
        history.append(float(np.linalg.norm(monolithic_service.condense(bs).rhs)))
        if history[-1] <= 1e-11 * history[0]:
            break
        inc, _ = monolithic_service.solve_saddle(bs)
        trial = solver.update_trial(trial, inc)

    assert history[-1] <= 1e-11 * history[0]
    significant = [h for h in history if h > 1e-12 * history[0]]
    rates = [later / earlier for earlier, later in zip(significant[:-1], significant[1:])]
    assert len(rates) >= 2
    assert all(later < earlier for earlier, later in zip(rates[:-1], rates[1:]))


def test_equal_interpolation_factors(column_config_data):
    """Test that ρ∞ = 1 on both sides gives a = b."""
    config = _column(column_config_data, "fluid", "dry_end", fluid_scheme={"kind": "gen_alpha", "rho_inf": 1.0})
    setup = case_service.build_problem(config)

    assert setup.solver.interp.a == pytest.approx(setup.solver.interp.b)


def test_rest_state_converges_immediately():
    """Test one Newton iteration and no linear iterations at rest."""
    config = _rest_cavity_config()
    setup = case_service.build_problem(config)

    result = setup.solver.newton_solve_step(setup.solid, setup.fluid, setup.lam)

    assert result.record.newton_iters == 1
    assert result.record.linear_iters == 0
    assert not result.solid.d.any()
    assert not result.fluid.up.any()
    assert not result.lam.lam_n.any()


def test_rest_state_saddle_increment_is_zero():
    """Test that the saddle system at rest has a zero solution."""
    setup = case_service.build_problem(_rest_cavity_config())
    solver = setup.solver
    trial = solver.initial_trial(setup.solid, setup.fluid)
    bs = solver.assemble(setup.solid, setup.fluid, setup.lam, trial, first_iter=True)

    inc, lam = monolithic_service.solve_saddle(bs)

    assert np.allclose(inc.stacked(), 0.0)
    assert np.allclose(lam, 0.0)


def test_condense_requires_matching_master(column_config):
    """Test that each condensation refuses the other master."""
    setup = case_service.build_problem(column_config)
    solver = setup.solver
    bs = solver.assemble(setup.solid, setup.fluid, setup.lam, solver.initial_trial(setup.solid, setup.fluid), True)

    with pytest.raises(ConsistencyError):
        monolithic_service.condense_fluid_handled(bs)


def test_missing_block_is_consistency_error(column_config):
    """Test that an incomplete BlockSystem is rejected."""
    setup = case_service.build_problem(column_config)
    solver = setup.solver
    bs = solver.assemble(setup.solid, setup.fluid, setup.lam, solver.initial_trial(setup.solid, setup.fluid), True)
    blocks = dict(bs.blocks)
    del blocks["FG_GG"]

    with pytest.raises(ConsistencyError):
        monolithic_service.build_saddle_system(dataclasses.replace(bs, blocks=blocks))


def test_unit_interpolation_factor_guard(column_config_data):
    """Test that a = 1 cannot be condensed with the fluid as master."""
    config = _column(column_config_data, "fluid", "dry_end")
    setup = case_service.build_problem(config)
    solver = setup.solver
    bs = solver.assemble(setup.solid, setup.fluid, setup.lam, solver.initial_trial(setup.solid, setup.fluid), True)

    with pytest.raises(InvalidConfigError):
        monolithic_service.condense_fluid_handled(dataclasses.replace(bs, interp=TractionInterpolation(a=1.0, b=0.2)))


def test_unit_fluid_factor_guard(column_config):
    """Test that b = 1 cannot be condensed with the structure as master."""
    setup = case_service.build_problem(column_config)
    solver = setup.solver
    bs = solver.assemble(setup.solid, setup.fluid, setup.lam, solver.initial_trial(setup.solid, setup.fluid), True)

    with pytest.raises(InvalidConfigError):
        monolithic_service.recover_lambda(dataclasses.replace(bs, interp=TractionInterpolation(a=0.5, b=1.0)))


def test_mortar_master_mismatch(column_config):
    """Test that the solver refuses operators built for the other master."""
    setup = case_service.build_problem(column_config)
    s = setup.solver

    with pytest.raises(InvalidConfigError):
        MonolithicSolver(s.structure, s.fluid, s.ale, s.mortar, s.solid_params, s.fluid_scheme, s.rule, "fluid")


def test_slave_interface_dirichlet_rejected(column_config_data):
    """Test that Dirichlet data on the slave interface is rejected."""
    config = _column(column_config_data, "fluid", "dry_end")
    setup = case_service.build_problem(config)
    s = setup.solver
    bad = StructureField(
        setup.solid_mesh, s.structure.dofmap, config.solid, config.solid_scheme, config.dt,
        DirichletSet(dofs=s.structure.dofmap.interface_dofs),
    )

    with pytest.raises(InvalidConfigError):
        MonolithicSolver(bad, s.fluid, s.ale, s.mortar, s.solid_params, s.fluid_scheme, s.rule, "fluid")


def test_column_multiplier_equals_interface_pressure(column_config_data):
    """Test λ_x = p at the moved interface, 2(1 - t²), for a backward Euler fluid."""
    config = _config(column_config_data, fluid_scheme={"kind": "one_step_theta", "theta": 1.0})

    outcome = case_service.simulate(config, write_outputs=False)

    lam = outcome.lam.lam_n.reshape(-1, 2)
    assert np.allclose(lam[:, 0], 2.0 * (1.0 - 0.1**2), atol=1e-8)
    assert outcome.record.steps[-1].lambda_components[0] == pytest.approx(1.98)


def test_column_lateral_multiplier_is_a_corner_reaction(column_config_data):
    """Test that λ_y only carries an antisymmetric, zero-sum reaction at the wall corners."""
    config = _config(column_config_data, fluid_scheme={"kind": "one_step_theta", "theta": 1.0})

    outcome = case_service.simulate(config, write_outputs=False)

    lam_y = outcome.lam.lam_n.reshape(-1, 2)[:, 1]
    # one element over the height: both interface nodes are wall corners
    assert lam_y.size == 2
    assert lam_y.sum() == pytest.approx(0.0, abs=1e-8)
    assert np.allclose(np.sort(lam_y), -np.sort(lam_y)[::-1], atol=1e-8)
    assert outcome.record.steps[-1].lambda_components[1] == pytest.approx(0.0, abs=1e-8)


def test_column_reproduces_uniform_flow(column_config):
    """Test that every step of the rigid-block column is exact."""
    outcome = case_service.simulate(column_config, write_outputs=False)
    t = outcome.fluid.t

    assert t == pytest.approx(0.1)
    assert np.allclose(outcome.fluid.velocity[:, 0], -2.0 * t, atol=1e-9)
    assert np.allclose(outcome.fluid.velocity[:, 1], 0.0, atol=1e-9)
    x = outcome.setup.fluid_mesh.node_coords[:, 0] + outcome.fluid.dg[0::2]
    assert np.allclose(outcome.fluid.pressure, 2.0 * x, atol=1e-9)
    assert np.allclose(outcome.solid.d[0::2], -(t**2), atol=1e-12)


def test_constraint_satisfied_after_each_step(column_config_data):
    """Test the mortar constraint at every converged step for both masters."""
    for master in ("structure", "fluid"):
        outcome = case_service.simulate(_column(column_config_data, master, "dry_end"), write_outputs=False)

        assert max(s.constraint_norm for s in outcome.record.steps) <= 1e-10


def test_oracle_check_records_difference(column_config_data):
    """Test that the per-iteration dense cross-check stays within tolerance."""
    config = _config(column_config_data, oracle_check=True, t_end=0.04)

    outcome = case_service.simulate(config, write_outputs=False)

    assert all(s.oracle_difference is not None for s in outcome.record.steps)
    assert max(s.oracle_difference for s in outcome.record.steps) <= EQUIVALENCE_TOL


def test_relative_difference_floor():
    """Test that roundoff-sized vectors are measured against the floor, not their own norm."""
    tiny = np.array([1e-17, 0.0])
    other = np.zeros(2)

    assert monolithic_service.relative_difference(tiny, other) == pytest.approx(1.0)
    assert monolithic_service.relative_difference(tiny, other, floor=1.0) <= 1e-16
    assert monolithic_service.relative_difference(np.zeros(2), np.zeros(2)) == 0.0


def test_preconditioner_blocks_cover_condensed_system(column_config_data):
    """Test that the block-Jacobi slices tile the condensed unknowns for both masters."""
    for master in ("structure", "fluid"):
        setup = case_service.build_problem(_column(column_config_data, master, "dry_end"))
        solver = setup.solver
        trial = solver.initial_trial(setup.solid, setup.fluid)
        system = monolithic_service.condense(solver.assemble(setup.solid, setup.fluid, setup.lam, trial, True))

        blocks = solver.preconditioner_blocks(system)

        assert len(blocks) == 3
        assert blocks[0].start == 0
        assert blocks[-1].stop == system.rhs.size
        assert all(first.stop == second.start for first, second in zip(blocks[:-1], blocks[1:]))


def test_predictors_do_not_change_the_answer(column_config_data):
    """Test that all predictors converge to the same states."""
    outcomes = [
        case_service.simulate(_column(column_config_data, "fluid", "dry_end", predictor=p), write_outputs=False)
        for p in ("const_dis", "const_vel", "const_acc")
    ]

    for other in outcomes[1:]:
        assert np.allclose(other.solid.d, outcomes[0].solid.d, atol=1e-8)
        assert np.allclose(other.fluid.up, outcomes[0].fluid.up, atol=1e-8)


def test_energy_vanishes_for_equal_factors(column_config_data):
    """Test zero interface energy per step when a = b."""
    config = _column(column_config_data, "fluid", "dry_end", fluid_scheme={"kind": "gen_alpha", "rho_inf": 1.0})

    outcome = case_service.simulate(config, write_outputs=False)

    assert all(s.interface_energy == 0.0 for s in outcome.record.steps)


def test_nonconvergence_carries_norms(column_config_data):
    """Test that exhausting the Newton budget reports the last norms."""
    newton = {**column_config_data["newton"], "max_iterations": 1}
    config = _config(column_config_data, newton=newton)
    setup = case_service.build_problem(config)

    with pytest.raises(NonConvergenceError) as exc_info:
        setup.solver.newton_solve_step(setup.solid, setup.fluid, setup.lam)

    assert exc_info.value.norms
    assert any(key.startswith("increment_") for key in exc_info.value.norms)


def test_nonconvergence_gets_step_context(column_config_data):
    """Test that the time loop names the failing step."""
    newton = {**column_config_data["newton"], "max_iterations": 1}

    with pytest.raises(NonConvergenceError) as exc_info:
        case_service.simulate(_config(column_config_data, newton=newton), write_outputs=False)

    assert exc_info.value.detail.startswith("step 1 (t=0.02)")

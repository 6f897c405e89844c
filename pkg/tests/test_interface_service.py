"""Tests for interface kinematics, tractions and energy."""
import numpy as np
import pytest

from dualfsi.core.exceptions import ShapeMismatchError
from dualfsi.schemas.schemes import ConversionRule, FluidTimeScheme, GenAlphaSolidParams, TractionInterpolation
from dualfsi.services.interface_service import interface_service
from dualfsi.services.mesh_service import mesh_service
from dualfsi.services.mortar_service import mortar_service


@pytest.fixture(params=["fluid", "structure"])
def unit_mortar(request):
    """Conforming unit-length interface with either master."""
    fluid, solid = mesh_service.generate_column_meshes(1.0, 1.0, 1.0, 1, 1, 1)
    fluid_map = mesh_service.build_dofmap(fluid, 3, "interface", "fluid", (0, 1))
    solid_map = mesh_service.build_dofmap(solid, 2, "interface", "structure")
    if request.param == "fluid":
        return mortar_service.assemble_mortar(solid, solid_map, fluid, fluid_map)
    return mortar_service.assemble_mortar(fluid, fluid_map, solid, solid_map)


def test_conversion_later_iteration():
    """Test Δd = (dt/2) Δu away from the first iteration."""
    rule = ConversionRule(kind="trapezoidal", dt=0.1)
    w = np.array([1.0, -2.0])

    out = interface_service.convert_velocity_increment(rule, w, np.array([5.0, 5.0]), first_iter=False)

    assert np.allclose(out, 0.05 * w)


def test_conversion_first_iteration_trapezoidal():
    """Test Δd = dt u^n for a constant velocity."""
    rule = ConversionRule(kind="trapezoidal", dt=0.1)

    out = interface_service.convert_velocity_increment(rule, np.zeros(1), np.ones(1), first_iter=True)

    assert out[0] == pytest.approx(0.1)


def test_conversion_first_iteration_backward_euler():
    """Test that stopping the interface gives no grid motion."""
    rule = ConversionRule(kind="backward_euler", dt=0.1)

    out = interface_service.convert_velocity_increment(rule, -np.ones(1), np.ones(1), first_iter=True)

    assert out[0] == pytest.approx(0.0)


def test_conversion_shape_mismatch():
    """Test that differently sized vectors are rejected."""
    with pytest.raises(ShapeMismatchError):
        interface_service.convert_velocity_increment(ConversionRule(dt=0.1), np.zeros(2), np.zeros(3), True)


def test_constraint_rhs_later_iteration(unit_mortar):
    """Test that the predictor terms vanish for i > 0."""
    rhs = interface_service.kinematic_constraint_rhs(
        unit_mortar, np.ones(unit_mortar.c_structure.shape[1]), np.ones(unit_mortar.c_fluid.shape[1]), False, 0.1
    )

    assert np.array_equal(rhs, np.zeros(unit_mortar.n_slave))


def test_constraint_rhs_rest(unit_mortar):
    """Test zero right-hand side without predictor and without flow."""
    rhs = interface_service.kinematic_constraint_rhs(
        unit_mortar, np.zeros(unit_mortar.c_structure.shape[1]), np.zeros(unit_mortar.c_fluid.shape[1]), True, 0.1
    )

    assert np.allclose(rhs, 0.0)


def test_constraint_rhs_const_vel_predictor(unit_mortar):
    """Test RHS = -D (dt v) for a unit-velocity predictor on a conforming interface."""
    dd_p = np.zeros(unit_mortar.c_structure.shape[1])
    dd_p[0::2] = 0.01

    rhs = interface_service.kinematic_constraint_rhs(unit_mortar, dd_p, np.zeros(unit_mortar.c_fluid.shape[1]), True, 0.01)

    assert np.allclose(rhs[0::2], -0.01 * unit_mortar.d_diagonal[0::2])
    assert np.allclose(rhs[1::2], 0.0)


def test_constraint_rhs_shape_mismatch(unit_mortar):
    """Test that vectors not matching the operators are rejected."""
    with pytest.raises(ShapeMismatchError):
        interface_service.kinematic_constraint_rhs(unit_mortar, np.zeros(7), np.zeros(4), True, 0.1)


def test_traction_residuals_zero(unit_mortar):
    """Test zero tractions for a zero multiplier."""
    zero = np.zeros(unit_mortar.n_slave)

    fluid, solid = interface_service.traction_residuals(TractionInterpolation(a=0.3, b=0.6), unit_mortar, zero, zero)

    assert not fluid.any() and not solid.any()


def test_traction_residuals_new_multiplier_only(unit_mortar):
    """Test that a = 0 puts the full new multiplier on the solid."""
    lam_new = np.zeros(unit_mortar.n_slave)
    lam_new[1] = 1.0

    _, solid = interface_service.traction_residuals(
        TractionInterpolation(a=0.0, b=0.0), unit_mortar, np.zeros(unit_mortar.n_slave), lam_new
    )

    assert np.allclose(solid, -unit_mortar.c_structure.toarray()[1])


def test_traction_residuals_equal_weights(unit_mortar, rng):
    """Test that the interpolation weights sum to one for a constant multiplier."""
    lam = rng.standard_normal(unit_mortar.n_slave)

    fluid, solid = interface_service.traction_residuals(TractionInterpolation(a=0.5, b=0.5), unit_mortar, lam, lam)

    assert np.allclose(solid, -(unit_mortar.c_structure.T @ lam))
    assert np.allclose(fluid, unit_mortar.c_fluid.T @ lam)


def test_traction_interpolation_from_schemes():
    """Test a = α_f of the solid and b from the fluid scheme."""
    interp = TractionInterpolation.from_schemes(
        GenAlphaSolidParams(rho_inf=1.0), FluidTimeScheme(kind="one_step_theta", theta=1.0)
    )

    assert interp.a == pytest.approx(0.5)
    assert interp.b == pytest.approx(0.0)


def test_energy_vanishes_for_equal_weights(rng):
    """Test that a = b produces no interface energy."""
    lam_n, lam_new, s = rng.standard_normal((3, 6))

    energy = interface_service.interface_energy_step(TractionInterpolation(a=0.4, b=0.4), lam_n, lam_new, s)

    assert energy == 0.0


def test_energy_vanishes_for_constant_multiplier(rng):
    """Test that λ^n = λ^{n+1} produces no interface energy."""
    lam, s = rng.standard_normal((2, 6))

    energy = interface_service.interface_energy_step(TractionInterpolation(a=0.6, b=0.1), lam, lam, s)

    assert energy == pytest.approx(0.0, abs=1e-15)


def test_energy_expansion(rng):
    """Test ΔE = -(a - b) q·s with q = λ^{n+1} - λ^n."""
    lam_n, q, s = rng.standard_normal((3, 6))

    energy = interface_service.interface_energy_step(TractionInterpolation(a=0.3, b=0.2), lam_n, lam_n + q, s)

    assert energy == pytest.approx(-0.1 * np.dot(q, s))


def test_constraint_norm(unit_mortar):
    """Test that matching interface displacements satisfy the constraint."""
    d = np.tile([0.1, -0.2], unit_mortar.c_structure.shape[1] // 2)
    g = np.tile([0.1, -0.2], unit_mortar.c_fluid.shape[1] // 2)

    assert interface_service.constraint_norm(unit_mortar, d, g) == pytest.approx(0.0, abs=1e-14)
    assert interface_service.constraint_norm(unit_mortar, d, np.zeros_like(g)) > 0.0

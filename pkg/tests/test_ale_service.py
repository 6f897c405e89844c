"""Tests for harmonic grid motion."""
import numpy as np
import pytest

from dualfsi.core.exceptions import ShapeMismatchError
from dualfsi.models.boundary import DirichletSet
from dualfsi.services.ale_service import AleField, ale_service
from dualfsi.services.mesh_service import mesh_service


@pytest.fixture
def fluid_column():
    """4x2 fluid column with interior nodes."""
    fluid, _ = mesh_service.generate_column_meshes(1.0, 1.0, 1.0, 4, 1, 2)
    return fluid


def _column_constraints(mesh):
    """Far end fixed, interface pulled by -0.1 in x, lateral y fixed."""
    left = mesh.edge_nodes("neumann")
    gamma = mesh.edge_nodes("interface")
    lateral = np.setdiff1d(mesh.edge_nodes("lateral"), np.union1d(left, gamma))
    dofs = np.concatenate([2 * left, 2 * left + 1, 2 * gamma, 2 * gamma + 1, 2 * lateral + 1])
    values = np.concatenate([np.zeros(2 * len(left)), np.full(len(gamma), -0.1), np.zeros(len(gamma) + len(lateral))])
    return dofs, values


def test_laplacian_properties(fluid_column):
    """Test symmetry and zero row sums of the grid operator."""
    matrix = ale_service.laplacian(fluid_column).toarray()

    assert np.allclose(matrix, matrix.T)
    assert np.allclose(matrix.sum(axis=1), 0.0, atol=1e-12)


def test_zero_boundary_gives_zero_grid(fluid_column):
    """Test that fixed boundaries at rest keep the interior at rest."""
    boundary = np.unique(
        np.concatenate([fluid_column.edge_nodes(s) for s in ("interface", "neumann", "lateral")])
    )
    dofs = np.concatenate([2 * boundary, 2 * boundary + 1])

    out = ale_service.extend_harmonic(fluid_column, dofs, np.zeros(dofs.size))

    assert np.allclose(out, 0.0)


def test_uniform_translation_is_reproduced(fluid_column):
    """Test that translating every boundary node translates the whole grid."""
    boundary = np.unique(
        np.concatenate([fluid_column.edge_nodes(s) for s in ("interface", "neumann", "lateral")])
    )
    dofs = np.concatenate([2 * boundary, 2 * boundary + 1])
    values = np.concatenate([np.full(boundary.size, 0.05), np.zeros(boundary.size)])

    out = ale_service.extend_harmonic(fluid_column, dofs, values).reshape(-1, 2)

    assert np.allclose(out[:, 0], 0.05)
    assert np.allclose(out[:, 1], 0.0, atol=1e-14)


def test_column_extension_is_linear(fluid_column):
    """Test that the x-displacement interpolates linearly between the column ends."""
    dofs, values = _column_constraints(fluid_column)

    out = ale_service.extend_harmonic(fluid_column, dofs, values).reshape(-1, 2)

    assert np.allclose(out[:, 0], -0.1 * fluid_column.node_coords[:, 0], atol=1e-12)
    assert np.allclose(out[:, 1], 0.0, atol=1e-12)


def test_field_residual_vanishes_at_harmonic_state(fluid_column):
    """Test that the harmonic extension is an equilibrium of the constrained grid rows."""
    grid_map = mesh_service.build_dofmap(fluid_column, 2, "interface", "grid")
    dofs, values = _column_constraints(fluid_column)
    dg = ale_service.extend_harmonic(fluid_column, dofs, values)
    outer = ~np.isin(dofs, grid_map.interface_dofs)
    field = AleField(fluid_column, grid_map, DirichletSet(dofs=dofs[outer], values=lambda t: values[outer]))

    blocks = field.assemble_blocks(dg, 0.0)

    assert np.allclose(blocks["r_I"], 0.0, atol=1e-12)
    assert blocks["II"].shape == (grid_map.n_interior, grid_map.n_interior)
    assert blocks["IG"].shape == (grid_map.n_interior, grid_map.n_interface)


def test_assemble_ale_shape_mismatch(fluid_column):
    """Test that a grid vector of the wrong length is rejected."""
    grid_map = mesh_service.build_dofmap(fluid_column, 2, "interface", "grid")

    with pytest.raises(ShapeMismatchError):
        ale_service.assemble_ale(fluid_column, grid_map, np.zeros(3))

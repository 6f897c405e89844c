"""Harmonic mesh motion for the fluid grid."""
from __future__ import annotations

import logging
from typing import Dict, Optional

import jax
import jax.numpy as jnp
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from dualfsi.core.exceptions import LinearSolverError, ShapeMismatchError
from dualfsi.elements.quadrature import GAUSS_2X2_WEIGHTS
from dualfsi.elements.solid import shape_gradients
from dualfsi.models.boundary import DirichletSet
from dualfsi.models.mesh import DofMap, Mesh2D
from dualfsi.models.system import split_blocks
from dualfsi.services.structure_service import element_dof_indices, scatter_pattern

logger = logging.getLogger(__name__)


class AleService:
    """Laplacian ⊗ I2 on the reference mesh, assembled once per mesh."""

    @staticmethod
    def laplacian(mesh: Mesh2D) -> sp.csr_matrix:
        grads, det = jax.vmap(shape_gradients)(jnp.asarray(mesh.node_coords[mesh.elements]))
        grads, det = np.asarray(grads), np.asarray(det)
        scalar = np.einsum("eq,eqai,eqbi->eab", det * GAUSS_2X2_WEIGHTS, grads, grads)
        element = np.einsum("eab,ij->eaibj", scalar, np.eye(2)).reshape(-1, 8, 8)
        dofs = element_dof_indices(mesh.elements, 2)
        rows, cols = scatter_pattern(dofs, dofs)
        n = 2 * mesh.n_nodes
        return sp.csr_matrix((element.ravel(), (rows, cols)), shape=(n, n))

    @staticmethod
    def assemble_ale(
        mesh: Mesh2D,
        dofmap: DofMap,
        dg: np.ndarray,
        dirichlet: Optional[DirichletSet] = None,
        t: float = 0.0,
        operator: Optional[sp.csr_matrix] = None,
    ) -> Dict[str, object]:
        """Interior residual r^G_I = (A d^G)_I and the blocks A_II, A_IG.

        Constrained outer-boundary dofs become identity rows; Γ rows are not returned.
        """
        if dg.shape != (dofmap.n_dofs,):
            raise ShapeMismatchError(f"grid vector has {dg.shape[0]} entries, expected {dofmap.n_dofs}")
        matrix = AleService.laplacian(mesh) if operator is None else operator
        residual = matrix @ dg
        if dirichlet is not None:
            residual, matrix, _ = dirichlet.apply(residual, matrix, dg, t)
        blocks = split_blocks(matrix, dofmap)
        return {"r_I": residual[dofmap.interior_dofs], "II": blocks["II"], "IG": blocks["IG"]}

    @staticmethod
    def extend_harmonic(mesh: Mesh2D, fixed_dofs: np.ndarray, fixed_values: np.ndarray) -> np.ndarray:
        """Solve A_FF x_F = -A_FB x_B for the free grid dofs."""
        matrix = AleService.laplacian(mesh)
        n = matrix.shape[0]
        fixed_dofs = np.asarray(fixed_dofs, dtype=np.int64)
        free = np.setdiff1d(np.arange(n), fixed_dofs)
        out = np.zeros(n)
        out[fixed_dofs] = fixed_values
        if free.size == 0:
            return out
        rhs = -(matrix[free][:, fixed_dofs] @ out[fixed_dofs])
        try:
            out[free] = splu(matrix[free][:, free].tocsc()).solve(rhs)
        except RuntimeError as exc:
            raise LinearSolverError(f"grid operator is singular: {exc}") from exc
        if not np.all(np.isfinite(out)):
            raise LinearSolverError("grid operator is singular")
        return out


class AleField:
    """Grid residual and operator with the outer-boundary constraints of a case."""

    def __init__(self, mesh: Mesh2D, dofmap: DofMap, dirichlet: Optional[DirichletSet] = None):
        self.mesh = mesh
        self.dofmap = dofmap
        self.dirichlet = dirichlet or DirichletSet.empty()
        self.operator = AleService.laplacian(mesh)

    def assemble_blocks(self, dg: np.ndarray, t: float) -> Dict[str, object]:
        return AleService.assemble_ale(self.mesh, self.dofmap, dg, self.dirichlet, t, self.operator)


ale_service = AleService()

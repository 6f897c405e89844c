"""Nonlinear elastodynamics with generalized-α time integration."""
from __future__ import annotations

import logging
from dataclasses import replace
from typing import Dict, Optional, Tuple

import jax.numpy as jnp
import numpy as np
import scipy.sparse as sp

from dualfsi.core.exceptions import AssemblyError, DomainError, InvalidParamsError
from dualfsi.elements import solid as solid_kernels
from dualfsi.models.boundary import DirichletSet
from dualfsi.models.mesh import DofMap, Mesh2D
from dualfsi.models.state import SolidState
from dualfsi.models.system import split_blocks, split_vector
from dualfsi.schemas.materials import SolidMaterial
from dualfsi.schemas.schemes import GenAlphaSolidParams, PredictorKind

logger = logging.getLogger(__name__)


def element_dof_indices(elements: np.ndarray, dofs_per_node: int) -> np.ndarray:
    """(n_elems, 4 * dofs_per_node) global dofs, node-major."""
    comps = np.arange(dofs_per_node)
    return (elements[:, :, None] * dofs_per_node + comps[None, None, :]).reshape(len(elements), -1)


def scatter_pattern(row_dofs: np.ndarray, col_dofs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """COO row/col arrays matching a (n_elems, nr, nc) stack of element matrices."""
    nr, nc = row_dofs.shape[1], col_dofs.shape[1]
    rows = np.repeat(row_dofs[:, :, None], nc, axis=2).ravel()
    cols = np.repeat(col_dofs[:, None, :], nr, axis=1).ravel()
    return rows, cols


class StructureField:
    """Mesh-bound assembler for the solid residual and tangent.

    The consistent mass matrix and the scatter pattern are built once.
    """

    def __init__(
        self,
        mesh: Mesh2D,
        dofmap: DofMap,
        material: SolidMaterial,
        params: GenAlphaSolidParams,
        dt: float,
        dirichlet: Optional[DirichletSet] = None,
    ):
        if dt <= 0.0:
            raise InvalidParamsError(f"time step must be positive, got {dt}")
        if params.beta <= 0.0:
            raise InvalidParamsError("generalized-α beta must be positive")
        self.mesh = mesh
        self.dofmap = dofmap
        self.material = material
        self.params = params
        self.dt = dt
        self.dirichlet = dirichlet or DirichletSet.empty()
        self.n_dofs = dofmap.n_dofs
        self.coords = mesh.node_coords[mesh.elements]
        self.elem_dofs = element_dof_indices(mesh.elements, 2)
        self._rows, self._cols = scatter_pattern(self.elem_dofs, self.elem_dofs)
        masses = solid_kernels.element_masses(self.coords, material.density_rho_s)
        self.mass = sp.csr_matrix((masses.ravel(), (self._rows, self._cols)), shape=(self.n_dofs, self.n_dofs))

    def _check_det_f(self, disp_e: np.ndarray) -> None:
        det = np.asarray(solid_kernels.det_f(jnp.asarray(self.coords), jnp.asarray(disp_e)))
        bad = np.nonzero(np.any(det <= 0.0, axis=1))[0]
        if bad.size:
            raise AssemblyError("non-positive deformation gradient determinant", element=int(bad[0]))

    def internal_force(self, d: np.ndarray, with_tangent: bool = True):
        """Global internal force and (optionally) its tangent stiffness."""
        disp_e = d[self.elem_dofs]
        self._check_det_f(disp_e)
        lam, mu = self.material.lame_lambda, self.material.lame_mu
        coords, disp = jnp.asarray(self.coords), jnp.asarray(disp_e)
        force_e = np.asarray(solid_kernels.internal_forces(coords, disp, lam, mu))
        force = np.bincount(self.elem_dofs.ravel(), weights=force_e.ravel(), minlength=self.n_dofs)
        if not with_tangent:
            return force, None
        tangent_e = np.asarray(solid_kernels.internal_force_tangents(coords, disp, lam, mu))
        tangent = sp.csr_matrix((tangent_e.ravel(), (self._rows, self._cols)), shape=(self.n_dofs, self.n_dofs))
        return force, tangent

    def with_old_force(self, state: SolidState) -> SolidState:
        """State with the internal force at t^n attached, computed only if missing."""
        if state.f_int is not None:
            return state
        force, _ = self.internal_force(state.d, with_tangent=False)
        return replace(state, f_int=force)

    def acceleration(self, state: SolidState, d_new: np.ndarray) -> np.ndarray:
        beta, dt = self.params.beta, self.dt
        return (d_new - state.d - dt * state.v - dt * dt * (0.5 - beta) * state.a) / (beta * dt * dt)

    def assemble(self, state: SolidState, d_new: np.ndarray, t_new: float) -> Tuple[np.ndarray, sp.csr_matrix]:
        """Generalized-α residual at the intermediate level and its tangent w.r.t. d^{n+1}.

        The interface multiplier is not part of this residual.
        """
        if d_new.shape != (self.n_dofs,):
            raise AssemblyError(f"trial vector has {d_new.shape[0]} entries, expected {self.n_dofs}")
        am, af, beta, dt = self.params.alpha_m, self.params.alpha_f, self.params.beta, self.dt
        f_new, stiffness = self.internal_force(d_new)
        f_old = self.with_old_force(state).f_int
        a_new = self.acceleration(state, d_new)
        residual = (
            self.mass @ ((1.0 - am) * a_new + am * state.a)
            + (1.0 - af) * f_new
            + af * f_old
        )
        tangent = ((1.0 - am) / (beta * dt * dt)) * self.mass + (1.0 - af) * stiffness
        residual, tangent, _ = self.dirichlet.apply(residual, tangent, d_new, t_new)
        return residual, tangent

    def assemble_blocks(self, state: SolidState, d_new: np.ndarray, t_new: float) -> Dict[str, object]:
        """Residual split (r_I, r_G) and tangent blocks II, IG, GI, GG."""
        residual, tangent = self.assemble(state, d_new, t_new)
        out: Dict[str, object] = dict(split_blocks(tangent, self.dofmap))
        out["r_I"], out["r_G"] = split_vector(residual, self.dofmap)
        return out


class StructureService:
    """Constitutive law, predictors and history update of the solid."""

    @staticmethod
    def svk_stress(right_cauchy_green: np.ndarray, material: SolidMaterial) -> np.ndarray:
        """PK2 stress of the plane-strain St. Venant-Kirchhoff law."""
        c = np.asarray(right_cauchy_green, dtype=float)
        if c.shape != (2, 2) or not np.allclose(c, c.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(c).max())):
            raise DomainError("right Cauchy-Green tensor must be a symmetric 2x2 matrix")
        try:
            np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            raise DomainError("right Cauchy-Green tensor is not positive definite") from None
        return np.asarray(solid_kernels.svk_pk2(jnp.asarray(c), material.lame_lambda, material.lame_mu))

    @staticmethod
    def predict_solid(state: SolidState, kind: PredictorKind, dt: float) -> SolidState:
        """Set Δd_p by polynomial extrapolation of the old state."""
        if kind == "const_dis":
            dd_p = np.zeros_like(state.d)
        elif kind == "const_vel":
            dd_p = dt * state.v
        elif kind == "const_acc":
            dd_p = dt * state.v + 0.5 * dt * dt * state.a
        else:
            raise InvalidParamsError(f"unknown predictor '{kind}'")
        return state.with_predictor(dd_p)

    @staticmethod
    def update_solid_history(
        state: SolidState, d_new: np.ndarray, params: GenAlphaSolidParams, dt: float
    ) -> SolidState:
        """Newmark update of velocity and acceleration from the converged displacement."""
        beta, gamma = params.beta, params.gamma
        if beta == 0.0:
            raise InvalidParamsError("beta = 0 is not an implicit Newmark scheme")
        a_new = (d_new - state.d - dt * state.v - dt * dt * (0.5 - beta) * state.a) / (beta * dt * dt)
        v_new = state.v + dt * ((1.0 - gamma) * state.a + gamma * a_new)
        return SolidState(d=np.array(d_new, dtype=float), v=v_new, a=a_new, t=state.t + dt)


structure_service = StructureService()

"""Stabilized ALE Navier-Stokes field: residual, F and shape-derivative F^G blocks."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import jax.numpy as jnp
import numpy as np
import scipy.sparse as sp

from dualfsi.core.exceptions import AssemblyError, InvalidParamsError
from dualfsi.elements.fluid import FluidKernelParams, compile_fluid_kernels
from dualfsi.models.boundary import DirichletSet
from dualfsi.models.mesh import DofMap, Mesh2D
from dualfsi.models.state import FluidState
from dualfsi.models.system import split_blocks, split_vector
from dualfsi.schemas.case import Stabilization
from dualfsi.schemas.materials import FluidMaterial
from dualfsi.schemas.schemes import ConversionRule, FluidTimeScheme
from dualfsi.services.mesh_service import MeshService
from dualfsi.services.structure_service import element_dof_indices, scatter_pattern

logger = logging.getLogger(__name__)

# d(t_y, -t_x)/d(x1) for an edge vector t = x1 - x0
_ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])


def fluid_time_weights(scheme: FluidTimeScheme) -> Tuple[float, Dict[str, float]]:
    """Weight b of the previous traction and the intermediate-level data."""
    if scheme.kind == "gen_alpha":
        data = {"alpha_m": scheme.alpha_m, "alpha_f": scheme.alpha_f, "gamma": scheme.gamma}
        return 1.0 - scheme.alpha_f, data
    if scheme.theta <= 0.0:
        raise InvalidParamsError("θ = 0 is explicit; only implicit fluid schemes are supported")
    return 1.0 - scheme.theta, {"theta": scheme.theta}


@dataclass(frozen=True)
class NeumannPressure:
    """Follower pressure p_N(t) on an edge set (traction -p_N n)."""

    edge_set: str
    pressure: Callable[[float], float]


class FluidField:
    """Mesh-bound assembler; compiles the element kernels once per instance."""

    def __init__(
        self,
        mesh: Mesh2D,
        dofmap: DofMap,
        grid_dofmap: DofMap,
        material: FluidMaterial,
        scheme: FluidTimeScheme,
        conversion: ConversionRule,
        stabilization: Optional[Stabilization] = None,
        dirichlet: Optional[DirichletSet] = None,
        neumann: Optional[NeumannPressure] = None,
    ):
        if dofmap.dofs_per_node != 3 or grid_dofmap.dofs_per_node != 2:
            raise InvalidParamsError("fluid needs 3 dofs per node and the grid 2")
        _, weights = fluid_time_weights(scheme)
        self.mesh = mesh
        self.dofmap = dofmap
        self.grid_dofmap = grid_dofmap
        self.material = material
        self.scheme = scheme
        self.conversion = conversion
        self.dt = conversion.dt
        self.stabilization = stabilization or Stabilization()
        self.dirichlet = dirichlet or DirichletSet.empty()
        self.neumann = neumann
        self.n_up = dofmap.n_dofs
        self.n_grid = grid_dofmap.n_dofs

        self.params = FluidKernelParams(
            kind=scheme.kind,
            dt=self.dt,
            density=material.density_rho_f,
            viscosity=material.dyn_viscosity_mu,
            theta=weights.get("theta", 1.0),
            alpha_m=weights.get("alpha_m", 1.0),
            alpha_f=weights.get("alpha_f", 1.0),
            gamma=weights.get("gamma", 1.0),
            grid_trapezoidal=conversion.kind == "trapezoidal",
            grad_div=self.stabilization.grad_div,
        )
        self._residual_fn, self._jacobian_fn = compile_fluid_kernels(self.params)
        self.coords = mesh.node_coords[mesh.elements]
        self.up_dofs = element_dof_indices(mesh.elements, 3)
        self.grid_dofs = element_dof_indices(mesh.elements, 2)
        self._f_pattern = scatter_pattern(self.up_dofs, self.up_dofs)
        self._fg_pattern = scatter_pattern(self.up_dofs, self.grid_dofs)
        self._neumann_edges = (
            mesh.edge_node_pairs(neumann.edge_set) if neumann is not None else np.zeros((0, 2), dtype=np.int64)
        )

    def _check_geometry(self, dg_new: np.ndarray) -> None:
        current = self.mesh.node_coords + dg_new.reshape(-1, 2)
        bad = np.nonzero(np.any(MeshService.corner_jacobians(current, self.mesh.elements) <= 0.0, axis=1))[0]
        if bad.size:
            raise AssemblyError("inverted element in the deformed fluid mesh", element=int(bad[0]))

    def _levels(self, state: FluidState, dg_new: np.ndarray, t_new: float):
        """(weight, grid displacement, time, d config / d dg_new) per evaluation level."""
        if self.params.kind == "gen_alpha":
            af = self.params.alpha_f
            return [(1.0, af * dg_new + (1.0 - af) * state.dg, t_new - (1.0 - af) * self.dt, af)]
        theta = self.params.theta
        return [(theta, dg_new, t_new, 1.0), (1.0 - theta, state.dg, t_new - self.dt, 0.0)]

    def _neumann(self, state: FluidState, dg_new: np.ndarray, t_new: float):
        residual = np.zeros(self.n_up)
        rows, cols, vals = [], [], []
        if self._neumann_edges.size == 0:
            return residual, sp.csr_matrix((self.n_up, self.n_grid))
        n0, n1 = self._neumann_edges[:, 0], self._neumann_edges[:, 1]
        for weight, dg, t_level, dconf in self._levels(state, dg_new, t_new):
            if weight == 0.0:
                continue
            x = self.mesh.node_coords + dg.reshape(-1, 2)
            edge = x[n1] - x[n0]
            load = 0.5 * weight * self.neumann.pressure(t_level)
            force = load * np.column_stack([edge[:, 1], -edge[:, 0]])
            for node in (n0, n1):
                for comp in range(2):
                    np.add.at(residual, node * 3 + comp, force[:, comp])
            if dconf == 0.0:
                continue
            for node in (n0, n1):
                for end, sign in ((n1, 1.0), (n0, -1.0)):
                    for i in range(2):
                        for j in range(2):
                            if _ROTATION[i, j] == 0.0:
                                continue
                            rows.append(node * 3 + i)
                            cols.append(end * 2 + j)
                            vals.append(np.full(len(node), sign * dconf * load * _ROTATION[i, j]))
        if rows:
            matrix = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n_up, self.n_grid)
            )
        else:
            matrix = sp.csr_matrix((self.n_up, self.n_grid))
        return residual, matrix

    def assemble(
        self, state: FluidState, up_new: np.ndarray, dg_new: np.ndarray, t_new: float
    ) -> Tuple[np.ndarray, sp.csr_matrix, sp.csr_matrix]:
        """Residual, F = dr/d(u, p) and F^G = dr/d d^G; interface multiplier excluded."""
        if up_new.shape != (self.n_up,) or dg_new.shape != (self.n_grid,):
            raise AssemblyError("fluid trial vectors do not match the dof maps")
        self._check_geometry(dg_new)
        args = (
            jnp.asarray(up_new[self.up_dofs]),
            jnp.asarray(dg_new[self.grid_dofs]),
            jnp.asarray(self.coords),
            jnp.asarray(state.up[self.up_dofs]),
            jnp.asarray(state.dg[self.grid_dofs]),
            jnp.asarray(state.ug[self.grid_dofs]),
            jnp.asarray(state.acc[self.grid_dofs]),
        )
        res_e = np.asarray(self._residual_fn(*args))
        jac_up, jac_grid = (np.asarray(j) for j in self._jacobian_fn(*args))

        residual = np.bincount(self.up_dofs.ravel(), weights=res_e.ravel(), minlength=self.n_up)
        f_mat = sp.csr_matrix((jac_up.ravel(), self._f_pattern), shape=(self.n_up, self.n_up))
        fg_mat = sp.csr_matrix((jac_grid.ravel(), self._fg_pattern), shape=(self.n_up, self.n_grid))

        if self.neumann is not None:
            load, load_jac = self._neumann(state, dg_new, t_new)
            residual = residual + load
            fg_mat = (fg_mat + load_jac).tocsr()
        if self.stabilization.drop_shape_derivatives:
            fg_mat = sp.csr_matrix((self.n_up, self.n_grid))

        residual, f_mat, (fg_mat,) = self.dirichlet.apply(residual, f_mat, up_new, t_new, coupled=[fg_mat])
        return residual, f_mat, fg_mat

    def assemble_blocks(self, state: FluidState, up_new: np.ndarray, dg_new: np.ndarray, t_new: float):
        """Residual split (r_I, r_G), F blocks and F^G blocks (keys FG_II ...)."""
        residual, f_mat, fg_mat = self.assemble(state, up_new, dg_new, t_new)
        out: Dict[str, object] = {f"F_{k}": v for k, v in split_blocks(f_mat, self.dofmap).items()}
        out.update({f"FG_{k}": v for k, v in split_blocks(fg_mat, self.dofmap, self.grid_dofmap).items()})
        out["r_I"], out["r_G"] = split_vector(residual, self.dofmap)
        return out


class FluidService:
    """History update of the fluid field."""

    @staticmethod
    def grid_velocity(rule: ConversionRule, dg_new: np.ndarray, dg_old: np.ndarray, ug_old: np.ndarray) -> np.ndarray:
        if rule.kind == "trapezoidal":
            return 2.0 * (dg_new - dg_old) / rule.dt - ug_old
        return (dg_new - dg_old) / rule.dt

    @staticmethod
    def update_fluid_history(
        state: FluidState,
        up_new: np.ndarray,
        dg_new: np.ndarray,
        scheme: FluidTimeScheme,
        rule: ConversionRule,
    ) -> FluidState:
        """Store the converged step and refresh grid velocity and acceleration."""
        dt = rule.dt
        u_new = up_new.reshape(-1, 3)[:, :2].ravel()
        u_old = state.up.reshape(-1, 3)[:, :2].ravel()
        if scheme.kind == "gen_alpha":
            gamma = scheme.gamma
            acc = (u_new - u_old) / (gamma * dt) - (1.0 - gamma) / gamma * state.acc
        else:
            acc = (u_new - u_old) / dt
        return FluidState(
            up=np.array(up_new, dtype=float),
            dg=np.array(dg_new, dtype=float),
            ug=FluidService.grid_velocity(rule, dg_new, state.dg, state.ug),
            acc=acc,
            t=state.t + dt,
        )


fluid_service = FluidService()

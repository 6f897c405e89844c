"""Monolithic Newton step: block assembly, condensation, multiplier recovery."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from dualfsi.config import settings
from dualfsi.core import metrics
from dualfsi.core.exceptions import (
    ConsistencyError,
    InvalidConfigError,
    LinearSolverError,
    NonConvergenceError,
    add_context,
)
from dualfsi.models.mortar import MortarOperators
from dualfsi.models.state import FluidState, LambdaState, SolidState
from dualfsi.models.system import BlockSystem, Increments, LinearSystem
from dualfsi.schemas.case import LinearSolverConfig, NewtonConfig
from dualfsi.schemas.schemes import (
    ConversionRule,
    FluidTimeScheme,
    GenAlphaSolidParams,
    MasterChoice,
    PredictorKind,
    TractionInterpolation,
)
from dualfsi.schemas.study import StepRecord
from dualfsi.services.ale_service import AleField
from dualfsi.services.fluid_service import FluidField, fluid_service
from dualfsi.services.interface_service import interface_service
from dualfsi.services.linalg_service import linalg_service
from dualfsi.services.structure_service import StructureField, structure_service

logger = logging.getLogger(__name__)

SADDLE_LAYOUT = ("d_I", "d_G", "u_I", "u_G", "g_I", "g_G", "lam")
FLUID_HANDLED_LAYOUT = ("d_I", "u_I", "u_G", "g_I")
STRUCTURE_HANDLED_LAYOUT = ("d_I", "d_G", "u_I", "g_I")

# block-Jacobi groups of the condensed unknowns
PRECONDITIONER_GROUPS = {
    "fluid": [["d_I"], ["u_I", "u_G"], ["g_I"]],
    "structure": [["d_I", "d_G"], ["u_I"], ["g_I"]],
}

# norm groups of the convergence test; "interface" uses the interface tolerance
NORM_GROUPS = {
    "fluid": {"solid": "d_I", "fluid": "u_I", "interface": "u_G", "grid": "g_I"},
    "structure": {"solid": "d_I", "interface": "d_G", "fluid": "u_I", "grid": "g_I"},
}


def _zeros(rows: int, cols: int) -> sp.csr_matrix:
    return sp.csr_matrix((rows, cols))


def _keep_rows(n: int, positions: np.ndarray) -> sp.dia_matrix:
    """Diagonal 0/1 matrix removing the given rows."""
    mask = np.ones(n)
    mask[positions] = 0.0
    return sp.diags(mask)


def _bmat(rows: List[List[sp.spmatrix]]) -> sp.csr_matrix:
    return sp.bmat(rows, format="csr")


def _check_interp(master: str, interp: TractionInterpolation, tau: float) -> None:
    if master == "fluid" and interp.a >= 1.0:
        raise InvalidConfigError("solid interpolation factor a = 1 cannot be condensed")
    if master == "structure":
        if interp.b >= 1.0:
            raise InvalidConfigError("fluid interpolation factor b = 1 cannot be condensed")
        if tau <= 0.0:
            raise InvalidConfigError("conversion parameter τ must be positive")


@dataclass(frozen=True, eq=False)
class TrialState:
    """Current Newton iterate of all three fields."""

    d: np.ndarray
    up: np.ndarray
    dg: np.ndarray


@dataclass(frozen=True, eq=False)
class StepResult:
    solid: SolidState
    fluid: FluidState
    lam: LambdaState
    record: StepRecord


class MonolithicService:
    """Operations on a BlockSystem; independent of meshes and fields."""

    @staticmethod
    def kinematic_offsets(bs: BlockSystem) -> Dict[str, np.ndarray]:
        """First-iteration offsets of the eliminated interface increments.

        Fluid-handled: Δd_Γ = τPΔu_Γ + c_d, Δd^G_Γ = τΔu_Γ + c_g.
        Structure-handled: Δu_Γ = PΔd_Γ/τ + e_u, Δd^G_Γ = PΔd_Γ + e_g.
        """
        rhs = interface_service.kinematic_constraint_rhs(bs.mortar, bs.dd_p_G, bs.u_n_G, bs.first_iter, bs.dt)
        slave_offset = bs.mortar.apply_d_inverse(rhs)
        if bs.master == "fluid":
            zero = np.zeros_like(bs.u_n_G)
            return {
                "d_G": slave_offset,
                "g_G": interface_service.convert_velocity_increment(bs.rule, zero, bs.u_n_G, bs.first_iter),
            }
        e_u = -slave_offset / bs.tau
        return {
            "u_G": e_u,
            "g_G": interface_service.convert_velocity_increment(bs.rule, e_u, bs.u_n_G, bs.first_iter),
        }

    @staticmethod
    def build_saddle_system(bs: BlockSystem) -> LinearSystem:
        """Uncondensed system in (Δd_I, Δd_Γ, Δu_I, Δu_Γ, Δd^G_I, Δd^G_Γ, λ^{n+1}).

        Rows: solid I/Γ, fluid I/Γ, grid I, mortar constraint, grid closure. The
        multiplier columns of master-side Dirichlet rows are removed.
        """
        bs.check()
        B, r, n = bs.blocks, bs.residuals, bs.sizes
        a, b, tau, delta = bs.interp.a, bs.interp.b, bs.tau, bs.delta
        c_s, c_f = bs.mortar.c_structure, bs.mortar.c_fluid
        lam_n = bs.lam_n
        hist_fluid, hist_solid = interface_service.traction_residuals(bs.interp, bs.mortar, lam_n, np.zeros_like(lam_n))
        constraint = interface_service.kinematic_constraint_rhs(bs.mortar, bs.dd_p_G, bs.u_n_G, bs.first_iter, bs.dt)

        keep_s = _keep_rows(n["d_G"], bs.master_dirichlet) if bs.master == "structure" else sp.identity(n["d_G"])
        keep_f = _keep_rows(n["u_G"], bs.master_dirichlet) if bs.master == "fluid" else sp.identity(n["u_G"])
        lam_solid = keep_s @ c_s.T
        lam_fluid = keep_f @ c_f.T

        z = _zeros
        rows = [
            [B["S_II"], B["S_IG"], z(n["d_I"], n["u_I"]), z(n["d_I"], n["u_G"]),
             z(n["d_I"], n["g_I"]), z(n["d_I"], n["g_G"]), z(n["d_I"], n["lam"])],
            [B["S_GI"], B["S_GG"], z(n["d_G"], n["u_I"]), z(n["d_G"], n["u_G"]),
             z(n["d_G"], n["g_I"]), z(n["d_G"], n["g_G"]), -(1.0 - a) * lam_solid],
            [z(n["u_I"], n["d_I"]), z(n["u_I"], n["d_G"]), B["F_II"], B["F_IG"],
             B["FG_II"], B["FG_IG"], z(n["u_I"], n["lam"])],
            [z(n["u_G"], n["d_I"]), z(n["u_G"], n["d_G"]), B["F_GI"], B["F_GG"],
             B["FG_GI"], B["FG_GG"], (1.0 - b) * lam_fluid],
            [z(n["g_I"], n["d_I"]), z(n["g_I"], n["d_G"]), z(n["g_I"], n["u_I"]), z(n["g_I"], n["u_G"]),
             B["A_II"], B["A_IG"], z(n["g_I"], n["lam"])],
            [z(n["lam"], n["d_I"]), -c_s, z(n["lam"], n["u_I"]), tau * c_f,
             z(n["lam"], n["g_I"]), z(n["lam"], n["g_G"]), z(n["lam"], n["lam"])],
        ]
        rhs = [
            -r["rS_I"],
            -r["rS_G"] - keep_s @ hist_solid,
            -r["rF_I"],
            -r["rF_G"] - keep_f @ hist_fluid,
            -r["rG_I"],
            -constraint,
        ]
        if bs.master == "fluid":
            rows.append([z(n["g_G"], n["d_I"]), z(n["g_G"], n["d_G"]), z(n["g_G"], n["u_I"]),
                         tau * sp.identity(n["u_G"]), z(n["g_G"], n["g_I"]), -sp.identity(n["g_G"]),
                         z(n["g_G"], n["lam"])])
            zero = np.zeros_like(bs.u_n_G)
            rhs.append(-interface_service.convert_velocity_increment(bs.rule, zero, bs.u_n_G, bs.first_iter))
        else:
            rows.append([z(n["lam"], n["d_I"]), c_s, z(n["lam"], n["u_I"]), z(n["lam"], n["u_G"]),
                         z(n["lam"], n["g_I"]), -c_f, z(n["lam"], n["lam"])])
            rhs.append(-delta * (c_s @ bs.dd_p_G))

        layout = [(name, n[name]) for name in SADDLE_LAYOUT]
        return LinearSystem(matrix=_bmat(rows), rhs=np.concatenate(rhs), layout=layout)

    @staticmethod
    def condense_fluid_handled(bs: BlockSystem) -> LinearSystem:
        """Eliminate λ, Δd_Γ and Δd^G_Γ; unknowns (Δd_I, Δu_I, Δu_Γ, Δd^G_I)."""
        if bs.master != "fluid":
            raise ConsistencyError("fluid-handled condensation needs the fluid as master")
        _check_interp("fluid", bs.interp, bs.tau)
        bs.check()
        B, r, n = bs.blocks, bs.residuals, bs.sizes
        a, b, tau = bs.interp.a, bs.interp.b, bs.tau
        P = bs.mortar.P
        w = (1.0 - b) / (1.0 - a)
        keep = _keep_rows(n["u_G"], bs.master_dirichlet)
        w_pt = (w * (keep @ P.T)).tocsr()
        off = MonolithicService.kinematic_offsets(bs)
        c_d, c_g = off["d_G"], off["g_G"]
        hist_fluid, hist_solid = interface_service.traction_residuals(
            bs.interp, bs.mortar, bs.lam_n, np.zeros_like(bs.lam_n)
        )

        z = _zeros
        rows = [
            [B["S_II"], z(n["d_I"], n["u_I"]), tau * (B["S_IG"] @ P), z(n["d_I"], n["g_I"])],
            [z(n["u_I"], n["d_I"]), B["F_II"], B["F_IG"] + tau * B["FG_IG"], B["FG_II"]],
            [w_pt @ B["S_GI"], B["F_GI"], B["F_GG"] + tau * B["FG_GG"] + tau * (w_pt @ B["S_GG"] @ P), B["FG_GI"]],
            [z(n["g_I"], n["d_I"]), z(n["g_I"], n["u_I"]), tau * B["A_IG"], B["A_II"]],
        ]
        rhs = [
            -r["rS_I"] - B["S_IG"] @ c_d,
            -r["rF_I"] - B["FG_IG"] @ c_g,
            -r["rF_G"]
            - w_pt @ r["rS_G"]
            - keep @ hist_fluid
            - w_pt @ hist_solid
            - B["FG_GG"] @ c_g
            - w_pt @ (B["S_GG"] @ c_d),
            -r["rG_I"] - B["A_IG"] @ c_g,
        ]
        layout = [(name, n[name]) for name in FLUID_HANDLED_LAYOUT]
        return LinearSystem(matrix=_bmat(rows), rhs=np.concatenate(rhs), layout=layout)

    @staticmethod
    def condense_structure_handled(bs: BlockSystem) -> LinearSystem:
        """Eliminate λ, Δu_Γ and Δd^G_Γ; unknowns (Δd_I, Δd_Γ, Δu_I, Δd^G_I)."""
        if bs.master != "structure":
            raise ConsistencyError("structure-handled condensation needs the structure as master")
        _check_interp("structure", bs.interp, bs.tau)
        bs.check()
        B, r, n = bs.blocks, bs.residuals, bs.sizes
        a, b, tau = bs.interp.a, bs.interp.b, bs.tau
        P = bs.mortar.P
        w = (1.0 - a) / (1.0 - b)
        keep = _keep_rows(n["d_G"], bs.master_dirichlet)
        w_pt = (w * (keep @ P.T)).tocsr()
        off = MonolithicService.kinematic_offsets(bs)
        e_u, e_g = off["u_G"], off["g_G"]
        hist_fluid, hist_solid = interface_service.traction_residuals(
            bs.interp, bs.mortar, bs.lam_n, np.zeros_like(bs.lam_n)
        )

        z = _zeros
        rows = [
            [B["S_II"], B["S_IG"], z(n["d_I"], n["u_I"]), z(n["d_I"], n["g_I"])],
            [B["S_GI"], B["S_GG"] + w_pt @ (B["F_GG"] / tau + B["FG_GG"]) @ P, w_pt @ B["F_GI"], w_pt @ B["FG_GI"]],
            [z(n["u_I"], n["d_I"]), (B["F_IG"] / tau + B["FG_IG"]) @ P, B["F_II"], B["FG_II"]],
            [z(n["g_I"], n["d_I"]), B["A_IG"] @ P, z(n["g_I"], n["u_I"]), B["A_II"]],
        ]
        rhs = [
            -r["rS_I"],
            -r["rS_G"]
            - w_pt @ r["rF_G"]
            - keep @ hist_solid
            - w_pt @ hist_fluid
            - w_pt @ (B["F_GG"] @ e_u + B["FG_GG"] @ e_g),
            -r["rF_I"] - B["F_IG"] @ e_u - B["FG_IG"] @ e_g,
            -r["rG_I"] - B["A_IG"] @ e_g,
        ]
        layout = [(name, n[name]) for name in STRUCTURE_HANDLED_LAYOUT]
        return LinearSystem(matrix=_bmat(rows), rhs=np.concatenate(rhs), layout=layout)

    @staticmethod
    def condense(bs: BlockSystem) -> LinearSystem:
        if bs.master == "fluid":
            return MonolithicService.condense_fluid_handled(bs)
        return MonolithicService.condense_structure_handled(bs)

    @staticmethod
    def expand_increments(bs: BlockSystem, system: LinearSystem, x: np.ndarray) -> Increments:
        """Full field increments from the solution of a condensed system."""
        off = MonolithicService.kinematic_offsets(bs)
        P, tau = bs.mortar.P, bs.tau
        seg = {name: system.segment(x, name) for name, _ in system.layout}
        if bs.master == "fluid":
            u_G = seg["u_G"]
            return Increments(
                d_I=seg["d_I"], d_G=tau * (P @ u_G) + off["d_G"],
                u_I=seg["u_I"], u_G=u_G,
                g_I=seg["g_I"], g_G=tau * u_G + off["g_G"],
            )
        d_G = seg["d_G"]
        projected = P @ d_G
        return Increments(
            d_I=seg["d_I"], d_G=d_G,
            u_I=seg["u_I"], u_G=projected / tau + off["u_G"],
            g_I=seg["g_I"], g_G=projected + off["g_G"],
        )

    @staticmethod
    def split_saddle_solution(system: LinearSystem, x: np.ndarray) -> Tuple[Increments, np.ndarray]:
        seg = {name: system.segment(x, name) for name in SADDLE_LAYOUT}
        lam = seg.pop("lam")
        return Increments(**seg), lam

    @staticmethod
    def solve_saddle(bs: BlockSystem, dof_cap: Optional[int] = None) -> Tuple[Increments, np.ndarray]:
        """Dense LU on the uncondensed system."""
        system = MonolithicService.build_saddle_system(bs)
        x = linalg_service.dense_lu_solve(system.matrix, system.rhs, dof_cap or settings.DENSE_LU_DOF_CAP)
        return MonolithicService.split_saddle_solution(system, x)

    @staticmethod
    def recover_lambda(bs: BlockSystem, inc: Optional[Increments] = None) -> np.ndarray:
        """λ^{n+1} from the slave interface momentum row.

        With `inc` omitted the row is evaluated at the assembled state.
        """
        _check_interp(bs.master, bs.interp, bs.tau)
        B, r, n = bs.blocks, bs.residuals, bs.sizes
        a, b = bs.interp.a, bs.interp.b
        if inc is None:
            zero = {k: np.zeros(n[k]) for k in ("d_I", "d_G", "u_I", "u_G", "g_I", "g_G")}
            inc = Increments(**zero)
        if bs.master == "fluid":
            row = r["rS_G"] + B["S_GI"] @ inc.d_I + B["S_GG"] @ inc.d_G
            return -a / (1.0 - a) * bs.lam_n + bs.mortar.apply_d_inverse(row) / (1.0 - a)
        row = (
            r["rF_G"]
            + B["F_GI"] @ inc.u_I
            + B["F_GG"] @ inc.u_G
            + B["FG_GI"] @ inc.g_I
            + B["FG_GG"] @ inc.g_G
        )
        return -b / (1.0 - b) * bs.lam_n - bs.mortar.apply_d_inverse(row) / (1.0 - b)

    @staticmethod
    def relative_difference(reference: np.ndarray, other: np.ndarray, floor: float = 0.0) -> float:
        """Difference relative to the larger norm, never scaled below `floor`."""
        scale = max(floor, np.linalg.norm(reference), np.linalg.norm(other))
        if scale == 0.0:
            return 0.0
        return float(np.linalg.norm(reference - other) / scale)


class MonolithicSolver:
    """Newton driver for one master choice.

    Holds the three field assemblers and the mortar operators of a case; a new
    instance is needed to change the master field.
    """

    def __init__(
        self,
        structure: StructureField,
        fluid: FluidField,
        ale: AleField,
        mortar: MortarOperators,
        solid_params: GenAlphaSolidParams,
        fluid_scheme: FluidTimeScheme,
        rule: ConversionRule,
        master: MasterChoice,
        predictor: PredictorKind = "const_dis",
        newton: Optional[NewtonConfig] = None,
        linear: Optional[LinearSolverConfig] = None,
        oracle_check: bool = False,
    ):
        if mortar.master_field != master:
            raise InvalidConfigError(f"mortar operators have '{mortar.master_field}' as master, not '{master}'")
        self.structure = structure
        self.fluid = fluid
        self.ale = ale
        self.mortar = mortar
        self.solid_params = solid_params
        self.fluid_scheme = fluid_scheme
        self.rule = rule
        self.master = master
        self.predictor = predictor
        self.newton = newton or NewtonConfig()
        self.linear = linear or LinearSolverConfig()
        self.oracle_check = oracle_check
        self.interp = TractionInterpolation.from_schemes(solid_params, fluid_scheme)
        _check_interp(master, self.interp, rule.tau)

        self._s_gamma = structure.dofmap.interface_dofs
        self._f_gamma = fluid.dofmap.interface_dofs
        self._g_gamma = ale.dofmap.interface_dofs
        self._check_dirichlet_placement()
        master_map, master_dirichlet = (
            (fluid.dofmap, fluid.dirichlet) if master == "fluid" else (structure.dofmap, structure.dirichlet)
        )
        constrained = np.isin(master_map.interface_dofs, master_dirichlet.dofs)
        self.master_dirichlet = np.nonzero(constrained)[0]
        interior = fluid.dofmap.interior_dofs
        self._pressure = interior % fluid.dofmap.dofs_per_node == 2

    def _check_dirichlet_placement(self) -> None:
        slave_map, slave_dirichlet = (
            (self.structure.dofmap, self.structure.dirichlet)
            if self.master == "fluid"
            else (self.fluid.dofmap, self.fluid.dirichlet)
        )
        if np.isin(slave_map.interface_dofs, slave_dirichlet.dofs).any():
            raise InvalidConfigError(f"interface Dirichlet data on the slave field '{slave_map.field}'")
        if np.isin(self._g_gamma, self.ale.dirichlet.dofs).any():
            raise InvalidConfigError("grid interface dofs cannot carry Dirichlet data")

    def initial_trial(self, solid_state: SolidState, fluid_state: FluidState) -> TrialState:
        """Predicted solid displacement; fluid and grid start from the old step."""
        return TrialState(
            d=solid_state.d + solid_state.predictor_increment,
            up=fluid_state.up.copy(),
            dg=fluid_state.dg.copy(),
        )

    def assemble(
        self,
        solid_state: SolidState,
        fluid_state: FluidState,
        lam_state: LambdaState,
        trial: TrialState,
        first_iter: bool,
    ) -> BlockSystem:
        t_new = solid_state.t + self.rule.dt
        solid = self.structure.assemble_blocks(solid_state, trial.d, t_new)
        fluid = self.fluid.assemble_blocks(fluid_state, trial.up, trial.dg, t_new)
        grid = self.ale.assemble_blocks(trial.dg, t_new)
        blocks = {f"S_{k}": solid[k] for k in ("II", "IG", "GI", "GG")}
        blocks.update({k: v for k, v in fluid.items() if k.startswith("F")})
        blocks["A_II"], blocks["A_IG"] = grid["II"], grid["IG"]
        residuals = {
            "rS_I": solid["r_I"], "rS_G": solid["r_G"],
            "rF_I": fluid["r_I"], "rF_G": fluid["r_G"],
            "rG_I": grid["r_I"],
        }
        return BlockSystem(
            master=self.master,
            interp=self.interp,
            rule=self.rule,
            first_iter=first_iter,
            mortar=self.mortar,
            blocks=blocks,
            residuals=residuals,
            lam_n=lam_state.lam_n,
            u_n_G=fluid_state.up[self._f_gamma],
            dd_p_G=solid_state.predictor_increment[self._s_gamma],
            master_dirichlet=self.master_dirichlet,
        )

    def update_trial(self, trial: TrialState, inc: Increments) -> TrialState:
        d, up, dg = trial.d.copy(), trial.up.copy(), trial.dg.copy()
        d[self.structure.dofmap.interior_dofs] += inc.d_I
        d[self._s_gamma] += inc.d_G
        up[self.fluid.dofmap.interior_dofs] += inc.u_I
        up[self._f_gamma] += inc.u_G
        dg[self.ale.dofmap.interior_dofs] += inc.g_I
        dg[self._g_gamma] += inc.g_G
        return TrialState(d=d, up=up, dg=dg)

    def preconditioner_blocks(self, system: LinearSystem) -> List[slice]:
        return linalg_service.field_blocks(system.group_sizes(PRECONDITIONER_GROUPS[self.master]))

    def convergence_norms(self, system: LinearSystem, increment: np.ndarray) -> Dict[str, Dict[str, float]]:
        """RMS 2-norm and max-norm of residual and increment per field group."""
        out: Dict[str, Dict[str, float]] = {}
        for kind, vector in (("residual", system.rhs), ("increment", increment)):
            for group, name in NORM_GROUPS[self.master].items():
                segment = system.segment(vector, name)
                parts = {group: segment}
                if name == "u_I":
                    parts = {"velocity": segment[~self._pressure], "pressure": segment[self._pressure]}
                for label, values in parts.items():
                    if values.size == 0:
                        continue
                    out[f"{kind}_{label}"] = {
                        "rms": float(np.linalg.norm(values) / np.sqrt(values.size)),
                        "max": float(np.abs(values).max()),
                    }
        return out

    def converged(self, norms: Dict[str, Dict[str, float]]) -> bool:
        for key, values in norms.items():
            tol = self.newton.interface_tol if key.endswith("_interface") else self.newton.field_tol
            if values["rms"] >= tol or values["max"] >= tol:
                return False
        return True

    def newton_solve_step(
        self,
        solid_state: SolidState,
        fluid_state: FluidState,
        lam_state: LambdaState,
        step: int = 1,
    ) -> StepResult:
        """Advance all fields and the multiplier by one time step."""
        started = time.perf_counter()
        dt = self.rule.dt
        t_new = solid_state.t + dt
        solid_state = structure_service.predict_solid(solid_state, self.predictor, dt)
        solid_state = self.structure.with_old_force(solid_state)
        trial = self.initial_trial(solid_state, fluid_state)

        bs = self.assemble(solid_state, fluid_state, lam_state, trial, first_iter=True)
        system = MonolithicService.condense(bs)
        history = [float(np.linalg.norm(system.rhs))]
        linear_iters = 0
        oracle_difference: Optional[float] = None
        oracle_scale = 0.0
        norms: Dict[str, Dict[str, float]] = {}
        iteration = 0

        for iteration in range(1, self.newton.max_iterations + 1):
            try:
                result = linalg_service.solve(system.matrix, system.rhs, self.linear, self.preconditioner_blocks(system))
            except LinearSolverError as exc:
                raise add_context(exc, f"Newton iteration {iteration}")
            linear_iters += result.iterations
            inc = MonolithicService.expand_increments(bs, system, result.x)
            if self.oracle_check:
                saddle_inc, _ = MonolithicService.solve_saddle(bs)
                reference = saddle_inc.stacked()
                # later increments vanish; keep the first one as the scale
                if iteration == 1:
                    oracle_scale = float(np.linalg.norm(reference))
                diff = MonolithicService.relative_difference(reference, inc.stacked(), oracle_scale)
                oracle_difference = diff if oracle_difference is None else max(oracle_difference, diff)
            trial = self.update_trial(trial, inc)

            bs = self.assemble(solid_state, fluid_state, lam_state, trial, first_iter=False)
            increment = result.x
            system = MonolithicService.condense(bs)
            history.append(float(np.linalg.norm(system.rhs)))
            norms = self.convergence_norms(system, increment)
            logger.debug(f"step {step} iteration {iteration}: residual {history[-1]:.3e}, {result.iterations} linear")
            if self.converged(norms):
                break
        else:
            if settings.METRICS_ENABLED:
                metrics.nonconverged_steps_total.inc()
            raise NonConvergenceError(
                f"Newton did not converge in {self.newton.max_iterations} iterations", norms=norms
            )

        lam_new = MonolithicService.recover_lambda(bs)
        d_gamma_old = solid_state.d[self._s_gamma]
        d_gamma_new = trial.d[self._s_gamma]
        weighted = interface_service.weighted_structure_increment(self.mortar, d_gamma_new - d_gamma_old)
        energy = interface_service.interface_energy_step(self.interp, lam_state.lam_n, lam_new, weighted)
        violation = interface_service.constraint_norm(self.mortar, d_gamma_new, trial.dg[self._g_gamma])

        new_solid = structure_service.update_solid_history(solid_state, trial.d, self.solid_params, dt)
        new_fluid = fluid_service.update_fluid_history(fluid_state, trial.up, trial.dg, self.fluid_scheme, self.rule)
        new_lam = lam_state.advance(lam_new)

        elapsed = time.perf_counter() - started
        if settings.METRICS_ENABLED:
            metrics.newton_iterations_total.labels(master=self.master).inc(iteration)
            metrics.linear_iterations_total.labels(method=self.linear.method).inc(linear_iters)
            metrics.step_duration_seconds.observe(elapsed)

        record = StepRecord(
            step=step,
            time=t_new,
            newton_iters=iteration,
            linear_iters=linear_iters,
            constraint_norm=violation,
            interface_energy=energy,
            residual_history=history,
            oracle_difference=oracle_difference,
            lambda_components=np.mean(lam_new.reshape(-1, 2), axis=0).tolist() if lam_new.size else [],
        )
        logger.info(
            f"step {step} t={t_new:.6g}: {iteration} Newton, {linear_iters} linear iterations",
            extra={"step": step, "newton_iters": iteration, "linear_iters": linear_iters},
        )
        return StepResult(solid=new_solid, fluid=new_fluid, lam=new_lam, record=record)


monolithic_service = MonolithicService()

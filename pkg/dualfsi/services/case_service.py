"""Case definitions, time loop and analytical errors."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from dualfsi.config import settings
from dualfsi.core.exceptions import FSIError, InvalidConfigError, add_context
from dualfsi.elements.quadrature import gauss_3x3, q1_derivatives, q1_shapes
from dualfsi.models.boundary import DirichletSet
from dualfsi.models.mesh import DofMap, Mesh2D
from dualfsi.models.state import FluidState, LambdaState, SolidState
from dualfsi.schemas.case import CaseConfig
from dualfsi.schemas.schemes import ConversionRule
from dualfsi.schemas.study import RunRecord
from dualfsi.services.ale_service import AleField
from dualfsi.services.export_service import export_service
from dualfsi.services.fluid_service import FluidField, NeumannPressure
from dualfsi.services.mesh_service import CAVITY_FRACTION, mesh_service
from dualfsi.services.monolithic_service import MonolithicSolver
from dualfsi.services.mortar_service import mortar_service
from dualfsi.services.structure_service import StructureField

logger = logging.getLogger(__name__)

Analytic = Callable[[np.ndarray, float], Tuple[np.ndarray, np.ndarray, np.ndarray]]


def drive_displacement(exponent: int, t: float) -> Tuple[float, float, float]:
    """d(t) = -t^k with its first two derivatives."""
    k = float(exponent)
    return -(t**k), -k * t ** (k - 1.0), -k * (k - 1.0) * t ** (k - 2.0) if k > 1.0 else 0.0


def lid_velocity(amplitude: float, period: float, t: float) -> float:
    return amplitude * (1.0 - np.cos(2.0 * np.pi * t / period))


@dataclass(eq=False)
class CaseSetup:
    """Meshes, solver and initial state of one configured run."""

    config: CaseConfig
    fluid_mesh: Mesh2D
    solid_mesh: Mesh2D
    solver: MonolithicSolver
    solid: SolidState
    fluid: FluidState
    lam: LambdaState
    analytic: Optional[Analytic] = None


@dataclass(frozen=True, eq=False)
class RunOutcome:
    """Run record together with the final field states."""

    record: RunRecord
    setup: CaseSetup
    solid: SolidState
    fluid: FluidState
    lam: LambdaState


class CaseService:
    """Builds the benchmark cases and runs their time loop."""

    @staticmethod
    def load_config(source: Union[str, Path, dict]) -> CaseConfig:
        """Parse a JSON case file (or an already decoded dict)."""
        if isinstance(source, dict):
            data = source
        else:
            path = Path(source)
            try:
                data = json.loads(path.read_text())
            except FileNotFoundError:
                raise InvalidConfigError(f"config file not found: {path}") from None
            except json.JSONDecodeError as exc:
                raise InvalidConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        try:
            config = CaseConfig.model_validate(data)
        except ValidationError as exc:
            raise InvalidConfigError(str(exc)) from None
        CaseService.validate_case(config)
        return config

    @staticmethod
    def validate_case(config: CaseConfig) -> None:
        """Dirichlet placement and drive checks that need more than one section."""
        if config.interface_dirichlet_field not in (None, config.master):
            raise InvalidConfigError(
                f"interface Dirichlet data on '{config.interface_dirichlet_field}', "
                f"which is the slave side for master '{config.master}'"
            )
        if config.case == "pseudo_column" and config.drive.kind == "rigid_block" and config.master != "structure":
            raise InvalidConfigError("a rigid_block drive prescribes the interface and needs the structure as master")
        if config.n_steps < 1:
            raise InvalidConfigError("t_end must cover at least one time step")

    @staticmethod
    def pseudo1d_analytic(exponent: int, rho: float, p_inf: float, x, t: float):
        """Uniform column flow: u = d'(t), a = d''(t), p = -ρ a x + p∞."""
        _, u, a = drive_displacement(exponent, t)
        x = np.asarray(x, dtype=float)
        return np.full_like(x, u), np.full_like(x, a), -rho * a * x + p_inf

    @staticmethod
    def l2_error(mesh: Mesh2D, values: np.ndarray, exact: Callable[[np.ndarray], np.ndarray], dg=None) -> float:
        """sqrt(∫ |v_h - v|² dx) with 3x3 Gauss on the (deformed) mesh.

        `values` holds one row of components per node; `exact` maps (n, 2) points to
        (n, components).
        """
        coords = mesh.node_coords if dg is None else mesh.node_coords + np.asarray(dg).reshape(-1, 2)
        points, weights = gauss_3x3()
        shapes = q1_shapes(points)
        dshapes = q1_derivatives(points)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        xe = coords[mesh.elements]
        jac = np.einsum("eai,qaj->eqij", xe, dshapes)
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        xq = np.einsum("qa,eai->eqi", shapes, xe)
        vq = np.einsum("qa,eac->eqc", shapes, values[mesh.elements])
        ref = np.asarray(exact(xq.reshape(-1, 2)), dtype=float).reshape(vq.shape)
        err2 = np.sum(weights[None, :] * np.abs(det) * np.sum((vq - ref) ** 2, axis=-1))
        return float(np.sqrt(err2))

    @staticmethod
    def _dofmaps(fluid_mesh: Mesh2D, solid_mesh: Mesh2D) -> Tuple[DofMap, DofMap, DofMap]:
        s_map = mesh_service.build_dofmap(solid_mesh, 2, "interface", field="structure")
        f_map = mesh_service.build_dofmap(fluid_mesh, 3, "interface", field="fluid", coupled_components=(0, 1))
        g_map = mesh_service.build_dofmap(fluid_mesh, 2, "interface", field="grid")
        return s_map, f_map, g_map

    @staticmethod
    def _mortar(config: CaseConfig, fluid_mesh, f_map, solid_mesh, s_map):
        if config.master == "fluid":
            return mortar_service.assemble_mortar(solid_mesh, s_map, fluid_mesh, f_map)
        return mortar_service.assemble_mortar(fluid_mesh, f_map, solid_mesh, s_map)

    @staticmethod
    def _assemble_setup(config, fluid_mesh, solid_mesh, maps, dirichlet, neumann, initial, analytic=None) -> CaseSetup:
        s_map, f_map, g_map = maps
        s_dir, f_dir, g_dir = dirichlet
        rule = ConversionRule(kind=config.conversion, dt=config.dt)
        structure = StructureField(solid_mesh, s_map, config.solid, config.solid_scheme, config.dt, s_dir)
        fluid = FluidField(
            fluid_mesh, f_map, g_map, config.fluid, config.fluid_scheme, rule,
            stabilization=config.stabilization, dirichlet=f_dir, neumann=neumann,
        )
        ale = AleField(fluid_mesh, g_map, g_dir)
        mortar = CaseService._mortar(config, fluid_mesh, f_map, solid_mesh, s_map)
        solver = MonolithicSolver(
            structure, fluid, ale, mortar,
            solid_params=config.solid_scheme,
            fluid_scheme=config.fluid_scheme,
            rule=rule,
            master=config.master,
            predictor=config.predictor,
            newton=config.newton,
            linear=config.linear_solver,
            oracle_check=config.oracle_check,
        )
        solid, fluid_state = initial
        return CaseSetup(
            config=config,
            fluid_mesh=fluid_mesh,
            solid_mesh=solid_mesh,
            solver=solver,
            solid=solid,
            fluid=fluid_state,
            lam=LambdaState.zeros(mortar.n_slave),
            analytic=analytic,
        )

    @staticmethod
    def build_column_problem(config: CaseConfig) -> CaseSetup:
        """Fluid column driven by a solid moving with d(t) = -t^k."""
        geo, drive, rho = config.column, config.drive, config.fluid.density_rho_f
        fluid_mesh, solid_mesh = mesh_service.generate_column_meshes(
            geo.fluid_len, geo.solid_len, geo.width, geo.nx_fluid, geo.nx_solid, geo.ny, geo.ny_solid
        )
        maps = CaseService._dofmaps(fluid_mesh, solid_mesh)
        s_map, f_map, g_map = maps
        fluid_slave = config.master == "structure"
        k = drive.exponent

        def prescribed(t: float) -> float:
            return drive_displacement(k, t)[0]

        s_nodes = np.arange(solid_mesh.n_nodes)
        s_free_y = s_map.interface_nodes if not fluid_slave else np.zeros(0, dtype=np.int64)
        if drive.kind == "rigid_block":
            s_x = s_map.node_dofs(s_nodes, [0])
        else:
            s_x = s_map.node_dofs(solid_mesh.edge_nodes("dirichlet"), [0])
        s_dir = DirichletSet.merge(
            [
                DirichletSet(dofs=s_map.node_dofs(np.setdiff1d(s_nodes, s_free_y), [1])),
                DirichletSet(dofs=s_x, values=prescribed),
            ]
        )

        f_nodes = np.arange(fluid_mesh.n_nodes)
        f_free_y = f_map.interface_nodes if fluid_slave else np.zeros(0, dtype=np.int64)
        f_dir = DirichletSet(dofs=f_map.node_dofs(np.setdiff1d(f_nodes, f_free_y), [1]))
        neumann = NeumannPressure("neumann", lambda t: drive.p_inf)

        left = fluid_mesh.edge_nodes("neumann")
        lateral = np.setdiff1d(fluid_mesh.edge_nodes("lateral"), g_map.interface_nodes)
        g_dir = DirichletSet(dofs=np.union1d(g_map.node_dofs(left), g_map.node_dofs(lateral, [1])))

        _, v0, a0 = drive_displacement(k, 0.0)
        solid = SolidState.at_rest(s_map.n_dofs)
        solid_v = solid.v.copy()
        solid_a = solid.a.copy()
        solid_v[0::2], solid_a[0::2] = v0, a0
        solid = SolidState(d=solid.d, v=solid_v, a=solid_a)

        fluid = FluidState.at_rest(fluid_mesh.n_nodes)
        up = fluid.up.reshape(-1, 3).copy()
        up[:, 0] = v0
        up[:, 2] = -rho * a0 * fluid_mesh.node_coords[:, 0] + drive.p_inf
        acc = fluid.acc.copy()
        acc[0::2] = a0
        fluid = FluidState(up=up.ravel(), dg=fluid.dg, ug=fluid.ug, acc=acc)

        def analytic(points: np.ndarray, t: float):
            return CaseService.pseudo1d_analytic(k, rho, drive.p_inf, points[:, 0], t)

        return CaseService._assemble_setup(
            config, fluid_mesh, solid_mesh, maps, (s_dir, f_dir, g_dir), neumann, (solid, fluid), analytic
        )

    @staticmethod
    def build_cavity_problem(config: CaseConfig) -> CaseSetup:
        """Lid-driven cavity with inflow strip and a flexible clamped bottom."""
        geo, lid = config.cavity, config.lid
        fluid_mesh, solid_mesh = mesh_service.generate_cavity_meshes(
            geo.n_cav, geo.n_top, geo.n_solid_x, geo.n_solid_y, geo.solid_thickness
        )
        maps = CaseService._dofmaps(fluid_mesh, solid_mesh)
        s_map, f_map, g_map = maps
        fluid_slave = config.master == "structure"

        def lid_value(t: float) -> float:
            return lid_velocity(lid.amplitude, lid.period, t)

        walls = np.union1d(fluid_mesh.edge_nodes("wall_left"), fluid_mesh.edge_nodes("wall_right"))
        if fluid_slave:
            walls = np.setdiff1d(walls, f_map.interface_nodes)
        inflow = fluid_mesh.edge_nodes("inflow")
        ramp = (fluid_mesh.node_coords[inflow, 1] - CAVITY_FRACTION) / (1.0 - CAVITY_FRACTION)
        top = fluid_mesh.edge_nodes("lid")
        f_dir = DirichletSet.merge(
            [
                DirichletSet(dofs=f_map.node_dofs(walls, [0, 1])),
                DirichletSet(dofs=f_map.node_dofs(inflow, [1])),
                DirichletSet(dofs=f_map.node_dofs(inflow, [0]), values=lambda t: lid_value(t) * ramp),
                DirichletSet(dofs=f_map.node_dofs(top, [1])),
                DirichletSet(dofs=f_map.node_dofs(top, [0]), values=lid_value),
            ]
        )

        outer = np.unique(
            np.concatenate(
                [fluid_mesh.edge_nodes(name) for name in ("lid", "wall_left", "inflow", "wall_right", "outflow")]
            )
        )
        g_dir = DirichletSet(dofs=g_map.node_dofs(np.setdiff1d(outer, g_map.interface_nodes)))

        clamped = np.union1d(solid_mesh.edge_nodes("clamped_left"), solid_mesh.edge_nodes("clamped_right"))
        if not fluid_slave:
            clamped = np.setdiff1d(clamped, s_map.interface_nodes)
        s_dir = DirichletSet(dofs=s_map.node_dofs(clamped))

        initial = (SolidState.at_rest(s_map.n_dofs), FluidState.at_rest(fluid_mesh.n_nodes))
        return CaseService._assemble_setup(
            config, fluid_mesh, solid_mesh, maps, (s_dir, f_dir, g_dir), None, initial
        )

    @staticmethod
    def build_problem(config: CaseConfig) -> CaseSetup:
        CaseService.validate_case(config)
        if config.case == "pseudo_column":
            return CaseService.build_column_problem(config)
        return CaseService.build_cavity_problem(config)

    @staticmethod
    def column_errors(setup: CaseSetup, fluid: FluidState) -> Tuple[float, float]:
        """Velocity and pressure L2 errors against the uniform column flow."""
        t = fluid.t

        def exact_u(points):
            u, _, _ = setup.analytic(points, t)
            return np.column_stack([u, np.zeros_like(u)])

        def exact_p(points):
            return setup.analytic(points, t)[2][:, None]

        err_u = CaseService.l2_error(setup.fluid_mesh, fluid.velocity, exact_u, fluid.dg)
        err_p = CaseService.l2_error(setup.fluid_mesh, fluid.pressure, exact_p, fluid.dg)
        return err_u, err_p

    @staticmethod
    def simulate(
        config: CaseConfig,
        output_dir: Optional[Union[str, Path]] = None,
        write_outputs: bool = True,
    ) -> RunOutcome:
        """Time loop over all steps; writes the diagnostics CSV and optional extras."""
        setup = CaseService.build_problem(config)
        out_dir = Path(output_dir or config.output_dir or settings.OUTPUT_DIR)
        logger.info(
            f"Running {config.case}: dt={config.dt:g}, {config.n_steps} steps, master={config.master}",
            extra={"case": config.case, "dt": config.dt, "master": config.master},
        )
        if write_outputs and config.dump_mortar:
            mortar_service.dump_mortar(setup.solver.mortar, out_dir)

        solid, fluid, lam = setup.solid, setup.fluid, setup.lam
        records = []
        for step in range(1, config.n_steps + 1):
            try:
                result = setup.solver.newton_solve_step(solid, fluid, lam, step=step)
            except FSIError as exc:
                raise add_context(exc, f"step {step} (t={solid.t + config.dt:.6g})")
            solid, fluid, lam = result.solid, result.fluid, result.lam
            records.append(result.record)

        record = RunRecord(
            dt=config.dt,
            solid_scheme=f"gen_alpha({config.solid_scheme.rho_inf:g})",
            fluid_scheme=config.fluid_scheme.label(),
            conversion=config.conversion,
            master=config.master,
            predictor=config.predictor,
            steps=records,
        )
        if setup.analytic is not None:
            record.err_u_l2, record.err_p_l2 = CaseService.column_errors(setup, fluid)
        if write_outputs:
            path = export_service.write_diagnostics(records, out_dir / f"diagnostics_dt{config.dt:g}.csv")
            record.diagnostics_path = str(path)
            if config.write_snapshot:
                export_service.write_snapshot(setup.fluid_mesh, fluid, setup.solid_mesh, solid, out_dir)
        logger.info(f"Finished {config.case}: {record.total_newton_iterations} Newton iterations")
        return RunOutcome(record=record, setup=setup, solid=solid, fluid=fluid, lam=lam)

    @staticmethod
    def run_case(
        config: CaseConfig,
        output_dir: Optional[Union[str, Path]] = None,
        write_outputs: bool = True,
    ) -> RunRecord:
        return CaseService.simulate(config, output_dir, write_outputs).record


case_service = CaseService()

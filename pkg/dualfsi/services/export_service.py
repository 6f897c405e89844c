"""CSV and JSON output of runs and studies."""
from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import numpy as np

from dualfsi.core.metrics import metrics_snapshot
from dualfsi.models.mesh import Mesh2D
from dualfsi.models.state import FluidState, SolidState
from dualfsi.schemas.study import RunRecord, StepRecord, StudyResult

logger = logging.getLogger(__name__)

DIAGNOSTICS_COLUMNS = ["step", "time", "newton_iters", "linear_iters", "constraint_norm", "interface_energy"]
STUDY_COLUMNS = ["dt", "err_u_L2", "err_p_L2", "order_u", "order_p"]
PREDICTOR_COLUMNS = ["predictor", "total_linear_iters", "total_newton_iters", "reduction_percent"]
FLUID_SNAPSHOT_COLUMNS = ["node", "x", "y", "ux", "uy", "p"]
SOLID_SNAPSHOT_COLUMNS = ["node", "x", "y", "dx", "dy"]

PathLike = Union[str, Path]


def _number(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _write_rows(path: PathLike, header: List[str], rows: Iterable[List[object]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    return path


class ExportService:
    """Writers for the fixed output schemas."""

    @staticmethod
    def write_diagnostics(records: List[StepRecord], path: PathLike) -> Path:
        """One row per converged step."""
        rows = [
            [r.step, _number(r.time), r.newton_iters, r.linear_iters, _number(r.constraint_norm), _number(r.interface_energy)]
            for r in records
        ]
        out = _write_rows(path, DIAGNOSTICS_COLUMNS, rows)
        logger.info(f"Wrote diagnostics for {len(records)} steps to {out}")
        return out

    @staticmethod
    def read_diagnostics(path: PathLike) -> List[Dict[str, str]]:
        with Path(path).open(newline="") as handle:
            return list(csv.DictReader(handle))

    @staticmethod
    def write_study(result: StudyResult, path: PathLike) -> Path:
        """Errors per dt level; the order columns refer to the previous level."""
        rows = []
        for i, run in enumerate(result.runs):
            order_u = result.order_u[i - 1] if i > 0 else None
            order_p = result.order_p[i - 1] if i > 0 else None
            rows.append([_number(run.dt), _number(run.err_u_l2), _number(run.err_p_l2), _number(order_u), _number(order_p)])
        return _write_rows(path, STUDY_COLUMNS, rows)

    @staticmethod
    def write_summary(result: StudyResult, path: PathLike, include_metrics: bool = True) -> Path:
        """Study summary JSON: schemes, orders, per-run totals and a metrics snapshot."""
        payload = {
            "summary": result.summary,
            "order_u": result.order_u,
            "order_p": result.order_p,
            "runs": [
                {
                    "dt": run.dt,
                    "err_u_L2": run.err_u_l2,
                    "err_p_L2": run.err_p_l2,
                    "solid_scheme": run.solid_scheme,
                    "fluid_scheme": run.fluid_scheme,
                    "conversion": run.conversion,
                    "master": run.master,
                    "predictor": run.predictor,
                    "total_linear_iters": run.total_linear_iterations,
                    "total_newton_iters": run.total_newton_iterations,
                }
                for run in result.runs
            ],
        }
        if include_metrics:
            payload["metrics"] = metrics_snapshot()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
        return path

    @staticmethod
    def write_predictor_table(runs: List[RunRecord], reductions: Dict[str, Optional[float]], path: PathLike) -> Path:
        """Cumulative iteration counts per predictor with the reduction against const_dis."""
        rows = [
            [run.predictor, run.total_linear_iterations, run.total_newton_iterations, _number(reductions.get(run.predictor))]
            for run in runs
        ]
        return _write_rows(path, PREDICTOR_COLUMNS, rows)

    @staticmethod
    def write_snapshot(
        fluid_mesh: Mesh2D,
        fluid: FluidState,
        solid_mesh: Mesh2D,
        solid: SolidState,
        directory: PathLike,
    ) -> List[Path]:
        """Nodal fields on the current configuration."""
        directory = Path(directory)
        x_f = fluid_mesh.node_coords + fluid.dg.reshape(-1, 2)
        up = fluid.up.reshape(-1, 3)
        fluid_rows = [
            [i, _number(x_f[i, 0]), _number(x_f[i, 1]), _number(up[i, 0]), _number(up[i, 1]), _number(up[i, 2])]
            for i in range(fluid_mesh.n_nodes)
        ]
        disp = solid.d.reshape(-1, 2)
        x_s = solid_mesh.node_coords + disp
        solid_rows = [
            [i, _number(x_s[i, 0]), _number(x_s[i, 1]), _number(disp[i, 0]), _number(disp[i, 1])]
            for i in range(solid_mesh.n_nodes)
        ]
        return [
            _write_rows(directory / "snapshot_fluid.csv", FLUID_SNAPSHOT_COLUMNS, fluid_rows),
            _write_rows(directory / "snapshot_solid.csv", SOLID_SNAPSHOT_COLUMNS, solid_rows),
        ]

    @staticmethod
    def observed_orders(errors: List[Optional[float]]) -> List[Optional[float]]:
        """log2(e(dt) / e(dt/2)) between consecutive levels."""
        orders: List[Optional[float]] = []
        for coarse, fine in zip(errors[:-1], errors[1:]):
            if coarse is None or fine is None or coarse <= 0.0 or fine <= 0.0:
                orders.append(None)
            else:
                orders.append(float(np.log2(coarse / fine)))
        return orders


export_service = ExportService()

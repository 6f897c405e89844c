"""Temporal convergence and predictor studies."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from dualfsi.config import settings
from dualfsi.core.exceptions import ConsistencyError, FSIError, InvalidConfigError, StudyError
from dualfsi.schemas.case import CaseConfig
from dualfsi.schemas.schemes import PredictorKind
from dualfsi.schemas.study import RunRecord, StudyResult
from dualfsi.services.case_service import RunOutcome, case_service
from dualfsi.services.export_service import export_service

logger = logging.getLogger(__name__)

PREDICTORS: Sequence[PredictorKind] = ("const_dis", "const_vel", "const_acc")
AGREEMENT_TOL = 1e-6


def _check_levels(dts: Sequence[float], t_end: float) -> None:
    if len(dts) < 3:
        raise InvalidConfigError(f"a convergence study needs at least 3 dt levels, got {len(dts)}")
    for coarse, fine in zip(dts[:-1], dts[1:]):
        if not np.isclose(fine, 0.5 * coarse, rtol=1e-9, atol=0.0):
            raise InvalidConfigError(f"dt levels must halve: {coarse:g} -> {fine:g}")
    for dt in dts:
        steps = t_end / dt
        if not np.isclose(steps, round(steps), rtol=0.0, atol=1e-9 * max(1.0, steps)):
            raise InvalidConfigError(f"t_end={t_end:g} is not a multiple of dt={dt:g}")


class StudyService:
    """Series of runs over one varied parameter."""

    @staticmethod
    def temporal_convergence_study(
        config: CaseConfig,
        dts: Sequence[float],
        output_dir: Optional[Union[str, Path]] = None,
    ) -> StudyResult:
        """Column runs with d(t) = -t^5 for each dt; errors at t_end and observed orders."""
        if config.case != "pseudo_column":
            raise InvalidConfigError("the convergence study runs the pseudo_column case")
        dts = [float(dt) for dt in dts]
        _check_levels(dts, config.t_end)
        out_dir = Path(output_dir or config.output_dir or settings.OUTPUT_DIR)
        drive = config.drive.model_copy(update={"exponent": 5})

        result = StudyResult()
        for dt in dts:
            run_config = config.model_copy(update={"dt": dt, "drive": drive})
            try:
                run = case_service.run_case(run_config, out_dir)
            except FSIError as exc:
                result.summary = StudyService._summary(config, "convergence", aborted_at=dt)
                partial = export_service.write_study(StudyService._with_orders(result), out_dir / "study_partial.csv")
                raise StudyError(f"run with dt={dt:g} failed: {exc.detail}", partial_path=str(partial)) from exc
            logger.info(f"dt={dt:g}: err_u={run.err_u_l2:.3e}, err_p={run.err_p_l2:.3e}")
            result.runs.append(run)

        result = StudyService._with_orders(result)
        result.summary = StudyService._summary(config, "convergence")
        export_service.write_study(result, out_dir / "study.csv")
        export_service.write_summary(result, out_dir / "study_summary.json", include_metrics=settings.METRICS_ENABLED)
        return result

    @staticmethod
    def _with_orders(result: StudyResult) -> StudyResult:
        result.order_u = export_service.observed_orders([r.err_u_l2 for r in result.runs])
        result.order_p = export_service.observed_orders([r.err_p_l2 for r in result.runs])
        return result

    @staticmethod
    def _summary(config: CaseConfig, kind: str, aborted_at: Optional[float] = None) -> Dict[str, object]:
        summary: Dict[str, object] = {
            "study": kind,
            "case": config.case,
            "solid_scheme": f"gen_alpha({config.solid_scheme.rho_inf:g})",
            "fluid_scheme": config.fluid_scheme.label(),
            "conversion": config.conversion,
            "master": config.master,
        }
        if aborted_at is not None:
            summary["aborted_at_dt"] = aborted_at
        return summary

    @staticmethod
    def state_difference(first: RunOutcome, other: RunOutcome) -> float:
        """Largest nodal difference of displacement, velocity/pressure and grid."""
        pairs = [
            (first.solid.d, other.solid.d),
            (first.fluid.up, other.fluid.up),
            (first.fluid.dg, other.fluid.dg),
        ]
        return max(float(np.abs(a - b).max()) if a.size else 0.0 for a, b in pairs)

    @staticmethod
    def predictor_study(
        config: CaseConfig,
        predictors: Sequence[PredictorKind] = PREDICTORS,
        output_dir: Optional[Union[str, Path]] = None,
    ) -> StudyResult:
        """Same case once per predictor; the answers must agree, iteration counts may not."""
        if not predictors:
            raise InvalidConfigError("no predictors given")
        out_dir = Path(output_dir or config.output_dir or settings.OUTPUT_DIR)
        outcomes: List[RunOutcome] = []
        for predictor in predictors:
            run_config = config.model_copy(update={"predictor": predictor})
            outcome = case_service.simulate(run_config, out_dir / predictor)
            outcomes.append(outcome)
            logger.info(
                f"predictor {predictor}: {outcome.record.total_linear_iterations} linear iterations",
                extra={"predictor": predictor},
            )

        for outcome in outcomes[1:]:
            diff = StudyService.state_difference(outcomes[0], outcome)
            if diff > AGREEMENT_TOL:
                raise ConsistencyError(
                    f"predictor {outcome.record.predictor} changed the solution by {diff:.3e} "
                    f"against {outcomes[0].record.predictor}"
                )

        runs: List[RunRecord] = [o.record for o in outcomes]
        result = StudyResult(runs=runs, summary=StudyService._summary(config, "predictor"))
        result.summary["reduction_percent"] = StudyService.reductions(runs)
        export_service.write_predictor_table(runs, result.summary["reduction_percent"], out_dir / "predictor_study.csv")
        export_service.write_summary(result, out_dir / "predictor_summary.json", include_metrics=settings.METRICS_ENABLED)
        return result

    @staticmethod
    def reductions(runs: List[RunRecord]) -> Dict[str, Optional[float]]:
        """Cumulative linear-iteration reduction against const_dis, in percent."""
        baseline = next((r.total_linear_iterations for r in runs if r.predictor == "const_dis"), None)
        out: Dict[str, Optional[float]] = {}
        for run in runs:
            if not baseline:
                out[run.predictor] = None
            else:
                out[run.predictor] = 100.0 * (baseline - run.total_linear_iterations) / baseline
        return out


study_service = StudyService()

"""Command-line entry point."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from dualfsi.config import settings
from dualfsi.core.exceptions import FSIError, InvalidConfigError
from dualfsi.core.logging import setup_logging
from dualfsi.core.metrics import write_metrics
from dualfsi.services.case_service import case_service
from dualfsi.services.study_service import PREDICTORS, study_service

logger = logging.getLogger(__name__)

EXIT_FSI_ERROR = 2


def _parse_dts(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid dt list '{text}'") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.APP_NAME, description="Monolithic FSI solver with dual mortar coupling")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.APP_VERSION}")
    parser.add_argument("--output-dir", default=None, help="directory for CSV/JSON outputs")
    parser.add_argument("--metrics-file", default=None, help="write prometheus text exposition after the command")
    parser.add_argument("--dump-mortar", action="store_true", help="write D, M and P as text")
    parser.add_argument("--oracle-check", action="store_true", help="cross-check each Newton step with the dense saddle solve")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one case")
    run.add_argument("config", type=Path)

    study = sub.add_parser("study", help="run a parameter study")
    kinds = study.add_subparsers(dest="study", required=True)
    conv = kinds.add_parser("convergence", help="temporal convergence on the pseudo column")
    conv.add_argument("config", type=Path)
    conv.add_argument("--dts", type=_parse_dts, default=[2e-2, 1e-2, 5e-3, 2.5e-3])
    pred = kinds.add_parser("predictor", help="compare solid predictors")
    pred.add_argument("config", type=Path)
    pred.add_argument("--predictors", default=",".join(PREDICTORS))
    return parser


def _load(args: argparse.Namespace):
    config = case_service.load_config(args.config)
    updates = {}
    if args.dump_mortar:
        updates["dump_mortar"] = True
    if args.oracle_check:
        updates["oracle_check"] = True
    return config.model_copy(update=updates) if updates else config


def run_command(args: argparse.Namespace) -> int:
    config = _load(args)
    if args.command == "run":
        record = case_service.run_case(config, args.output_dir)
        print(f"{len(record.steps)} steps, {record.total_newton_iterations} Newton / "
              f"{record.total_linear_iterations} linear iterations")
        if record.err_u_l2 is not None:
            print(f"L2 error: velocity {record.err_u_l2:.3e}, pressure {record.err_p_l2:.3e}")
    elif args.study == "convergence":
        result = study_service.temporal_convergence_study(config, args.dts, args.output_dir)
        for run, order in zip(result.runs, [None] + result.order_u):
            suffix = "" if order is None else f" (order {order:.2f})"
            print(f"dt={run.dt:g}: err_u={run.err_u_l2:.3e}, err_p={run.err_p_l2:.3e}{suffix}")
    else:
        predictors = [p.strip() for p in args.predictors.split(",") if p.strip()]
        unknown = sorted(set(predictors) - set(PREDICTORS))
        if unknown:
            raise InvalidConfigError(f"unknown predictors: {', '.join(unknown)}")
        result = study_service.predictor_study(config, predictors, args.output_dir)
        for run in result.runs:
            print(f"{run.predictor}: {run.total_linear_iterations} linear iterations")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, settings.LOG_FORMAT)
    try:
        code = run_command(args)
    except FSIError as exc:
        print(f"error: {exc.detail}", file=sys.stderr, flush=True)
        logger.error(f"{type(exc).__name__}: {exc.detail}")
        code = EXIT_FSI_ERROR
    if args.metrics_file:
        write_metrics(args.metrics_file)
    return code


if __name__ == "__main__":
    sys.exit(main())

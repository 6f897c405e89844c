"""Prometheus metrics for the nonlinear solver."""
from typing import Dict

from prometheus_client import REGISTRY, Counter, Histogram, generate_latest

newton_iterations_total = Counter(
    "dualfsi_newton_iterations_total",
    "Total Newton iterations",
    ["master"],
)

linear_iterations_total = Counter(
    "dualfsi_linear_iterations_total",
    "Total linear solver iterations",
    ["method"],
)

step_duration_seconds = Histogram(
    "dualfsi_step_duration_seconds",
    "Wall time per time step in seconds",
)

nonconverged_steps_total = Counter(
    "dualfsi_nonconverged_steps_total",
    "Time steps that failed to converge",
)


def metrics_snapshot() -> Dict[str, float]:
    """Current sample values of the dualfsi metrics keyed by sample name and labels."""
    snapshot: Dict[str, float] = {}
    for metric in REGISTRY.collect():
        if not metric.name.startswith("dualfsi_"):
            continue
        for sample in metric.samples:
            if sample.name.endswith("_created"):
                continue
            labels = ",".join(f"{k}={v}" for k, v in sorted(sample.labels.items()))
            key = f"{sample.name}{{{labels}}}" if labels else sample.name
            snapshot[key] = float(sample.value)
    return snapshot


def write_metrics(path: str) -> None:
    """Write the text exposition format to a file."""
    with open(path, "wb") as handle:
        handle.write(generate_latest())

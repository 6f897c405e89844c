"""Run and study result schemas."""
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class StepRecord(BaseModel):
    """Diagnostics of one converged time step."""

    step: int
    time: float
    newton_iters: int
    linear_iters: int
    constraint_norm: float
    interface_energy: float
    residual_history: List[float] = Field(default_factory=list)
    oracle_difference: Optional[float] = None
    lambda_components: List[float] = Field(default_factory=list)


class RunRecord(BaseModel):
    """Outcome of one time loop."""

    dt: float
    err_u_l2: Optional[float] = None
    err_p_l2: Optional[float] = None
    solid_scheme: str
    fluid_scheme: str
    conversion: str
    master: str
    predictor: str
    steps: List[StepRecord] = Field(default_factory=list)
    diagnostics_path: Optional[str] = None

    @property
    def total_linear_iterations(self) -> int:
        return sum(s.linear_iters for s in self.steps)

    @property
    def total_newton_iterations(self) -> int:
        return sum(s.newton_iters for s in self.steps)


class StudyResult(BaseModel):
    """Series of runs with observed convergence orders between consecutive levels."""

    runs: List[RunRecord] = Field(default_factory=list)
    order_u: List[Optional[float]] = Field(default_factory=list)
    order_p: List[Optional[float]] = Field(default_factory=list)
    summary: Dict[str, object] = Field(default_factory=dict)

"""Case configuration schemas."""
from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, Field, model_validator

from dualfsi.schemas.materials import FluidMaterial, SolidMaterial
from dualfsi.schemas.schemes import (
    FluidTimeScheme,
    GenAlphaSolidParams,
    MasterChoice,
    PredictorKind,
)


class NewtonConfig(BaseModel):
    """Newton convergence criteria (residual and increment, 2-norm and max-norm)."""

    field_tol: float = Field(1e-8, gt=0.0)
    interface_tol: float = Field(1e-9, gt=0.0)
    max_iterations: int = Field(20, ge=1)

    class Config:
        extra = "forbid"


class LinearSolverConfig(BaseModel):
    """Linear solver settings."""

    method: Literal["gmres", "dense_lu"] = "gmres"
    restart: int = Field(50, ge=1)
    rel_tol: float = Field(1e-5, gt=0.0, lt=1.0)
    max_iterations: int = Field(2000, ge=1)
    preconditioner: Literal["ilu0", "none"] = "ilu0"
    dof_cap: Optional[int] = Field(None, ge=1)

    class Config:
        extra = "forbid"


class Stabilization(BaseModel):
    """Fluid stabilization switches."""

    grad_div: bool = False
    drop_shape_derivatives: bool = False

    class Config:
        extra = "forbid"


class ColumnGeometry(BaseModel):
    fluid_len: float = 1.0
    solid_len: float = 1.0
    width: float = 0.25
    nx_fluid: int = 4
    nx_solid: int = 4
    ny: int = 1
    ny_solid: Optional[int] = None

    class Config:
        extra = "forbid"


class CavityGeometry(BaseModel):
    n_cav: int = 16
    n_top: int = 2
    n_solid_x: int = 18
    n_solid_y: int = 1
    solid_thickness: float = 0.05

    class Config:
        extra = "forbid"


class ColumnDrive(BaseModel):
    """Prescribed displacement d(t) = -t^exponent of the solid column."""

    exponent: Literal[2, 5] = 2
    kind: Literal["rigid_block", "dry_end"] = "rigid_block"
    p_inf: float = 0.0

    class Config:
        extra = "forbid"


class LidDrive(BaseModel):
    """Lid velocity u(t) = amplitude * (1 - cos(2 pi t / period))."""

    amplitude: float = 1.0
    period: float = Field(5.0, gt=0.0)

    class Config:
        extra = "forbid"


CASE_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "pseudo_column": {
        "solid": {"young_E": 100.0, "poisson_nu": 0.0, "density_rho_s": 1.0},
        "fluid": {"dyn_viscosity_mu": 0.01, "density_rho_f": 1.0},
        "master": "structure",
        "dt": 0.02,
        "t_end": 0.2,
    },
    "driven_cavity": {
        "solid": {"young_E": 250.0, "poisson_nu": 0.0, "density_rho_s": 500.0},
        "fluid": {"dyn_viscosity_mu": 0.01, "density_rho_f": 1.0},
        "master": "structure",
        "dt": 0.01,
        "t_end": 0.5,
    },
}


class CaseConfig(BaseModel):
    """Full description of one simulation run."""

    case: Literal["pseudo_column", "driven_cavity"]
    column: ColumnGeometry = Field(default_factory=ColumnGeometry)
    cavity: CavityGeometry = Field(default_factory=CavityGeometry)
    drive: ColumnDrive = Field(default_factory=ColumnDrive)
    lid: LidDrive = Field(default_factory=LidDrive)
    solid: SolidMaterial
    fluid: FluidMaterial
    solid_scheme: GenAlphaSolidParams = Field(default_factory=GenAlphaSolidParams)
    fluid_scheme: FluidTimeScheme = Field(default_factory=FluidTimeScheme)
    conversion: Literal["trapezoidal", "backward_euler"] = "trapezoidal"
    master: MasterChoice
    predictor: PredictorKind = "const_dis"
    dt: float = Field(..., gt=0.0)
    t_end: float = Field(..., gt=0.0)
    newton: NewtonConfig = Field(default_factory=NewtonConfig)
    linear_solver: LinearSolverConfig = Field(default_factory=LinearSolverConfig)
    stabilization: Stabilization = Field(default_factory=Stabilization)
    interface_dirichlet_field: Optional[MasterChoice] = None
    output_dir: Optional[str] = None
    oracle_check: bool = False
    dump_mortar: bool = False
    write_snapshot: bool = False

    class Config:
        extra = "forbid"

    @model_validator(mode="before")
    @classmethod
    def _apply_case_defaults(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("case") in CASE_DEFAULTS:
            merged = dict(CASE_DEFAULTS[data["case"]])
            for key, value in data.items():
                if isinstance(value, dict) and isinstance(merged.get(key), dict):
                    merged[key] = {**merged[key], **value}
                else:
                    merged[key] = value
            return merged
        return data

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

"""Time integration and interface coupling parameter schemas."""
from typing import Literal, Optional

from pydantic import BaseModel, Field

from dualfsi.core.exceptions import InvalidParamsError

MasterChoice = Literal["fluid", "structure"]
PredictorKind = Literal["const_dis", "const_vel", "const_acc"]


class GenAlphaSolidParams(BaseModel):
    """Generalized-α parameters of the solid, derived from the spectral radius.

    Explicit values override the derived ones (used to exercise invalid settings).
    """

    rho_inf: float = Field(1.0, ge=0.0, le=1.0)
    alpha_m_override: Optional[float] = Field(None, alias="alpha_m")
    alpha_f_override: Optional[float] = Field(None, alias="alpha_f")
    beta_override: Optional[float] = Field(None, alias="beta")
    gamma_override: Optional[float] = Field(None, alias="gamma")

    class Config:
        extra = "forbid"
        frozen = True
        populate_by_name = True

    @property
    def alpha_m(self) -> float:
        if self.alpha_m_override is not None:
            return self.alpha_m_override
        return (2.0 * self.rho_inf - 1.0) / (self.rho_inf + 1.0)

    @property
    def alpha_f(self) -> float:
        if self.alpha_f_override is not None:
            return self.alpha_f_override
        return self.rho_inf / (self.rho_inf + 1.0)

    @property
    def beta(self) -> float:
        if self.beta_override is not None:
            return self.beta_override
        return 0.25 * (1.0 - self.alpha_m + self.alpha_f) ** 2

    @property
    def gamma(self) -> float:
        if self.gamma_override is not None:
            return self.gamma_override
        return 0.5 - self.alpha_m + self.alpha_f


class FluidTimeScheme(BaseModel):
    """One-step-θ or generalized-α (Jansen) fluid integrator."""

    kind: Literal["one_step_theta", "gen_alpha"] = "gen_alpha"
    theta: float = Field(0.5, ge=0.0, le=1.0)
    rho_inf: float = Field(1.0, ge=0.0, le=1.0)

    class Config:
        extra = "forbid"
        frozen = True

    @property
    def alpha_m(self) -> float:
        return 0.5 * (3.0 - self.rho_inf) / (1.0 + self.rho_inf)

    @property
    def alpha_f(self) -> float:
        return 1.0 / (1.0 + self.rho_inf)

    @property
    def gamma(self) -> float:
        return 0.5 + self.alpha_m - self.alpha_f

    def label(self) -> str:
        if self.kind == "gen_alpha":
            return f"gen_alpha({self.rho_inf:g})"
        return f"theta({self.theta:g})"


class ConversionRule(BaseModel):
    """Interface velocity to grid displacement conversion."""

    kind: Literal["trapezoidal", "backward_euler"] = "trapezoidal"
    dt: float = Field(..., gt=0.0)

    class Config:
        extra = "forbid"
        frozen = True

    @property
    def tau(self) -> float:
        return 0.5 * self.dt if self.kind == "trapezoidal" else self.dt


class TractionInterpolation(BaseModel):
    """Weights of the previous multiplier in the solid (a) and fluid (b) tractions."""

    a: float = Field(..., ge=0.0, le=1.0)
    b: float = Field(..., ge=0.0, le=1.0)

    class Config:
        extra = "forbid"
        frozen = True

    @classmethod
    def from_schemes(cls, solid: GenAlphaSolidParams, fluid: FluidTimeScheme) -> "TractionInterpolation":
        from dualfsi.services.fluid_service import fluid_time_weights

        b, _ = fluid_time_weights(fluid)
        if not 0.0 <= solid.alpha_f < 1.0:
            raise InvalidParamsError(f"solid alpha_f={solid.alpha_f} outside [0, 1)")
        return cls(a=solid.alpha_f, b=b)

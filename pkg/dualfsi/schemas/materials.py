"""Material parameter schemas."""
from pydantic import BaseModel, Field


class SolidMaterial(BaseModel):
    """St. Venant-Kirchhoff solid, plane strain."""

    young_E: float = Field(..., gt=0.0, description="Young's modulus")
    poisson_nu: float = Field(0.0, gt=-1.0, lt=0.5, description="Poisson ratio")
    density_rho_s: float = Field(..., gt=0.0, description="Reference density")

    class Config:
        extra = "forbid"
        frozen = True

    @property
    def lame_lambda(self) -> float:
        nu = self.poisson_nu
        return self.young_E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))

    @property
    def lame_mu(self) -> float:
        return self.young_E / (2.0 * (1.0 + self.poisson_nu))


class FluidMaterial(BaseModel):
    """Incompressible Newtonian fluid."""

    dyn_viscosity_mu: float = Field(..., gt=0.0, description="Dynamic viscosity")
    density_rho_f: float = Field(..., gt=0.0, description="Density")

    class Config:
        extra = "forbid"
        frozen = True

    @property
    def kinematic_viscosity(self) -> float:
        return self.dyn_viscosity_mu / self.density_rho_f

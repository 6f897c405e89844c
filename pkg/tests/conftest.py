"""Pytest configuration and fixtures."""
import numpy as np
import pytest

from dualfsi.schemas.case import CaseConfig
from dualfsi.schemas.materials import FluidMaterial, SolidMaterial
from dualfsi.services.mesh_service import mesh_service


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long cavity and convergence runs")


@pytest.fixture
def column_meshes():
    """Matching 2x1 fluid and 2x1 solid column meshes."""
    return mesh_service.generate_column_meshes(1.0, 1.0, 0.25, 2, 2, 1)


@pytest.fixture
def nonmatching_column_meshes():
    """Column meshes with 2 fluid and 3 solid elements along the interface."""
    return mesh_service.generate_column_meshes(1.0, 1.0, 1.0, 1, 1, 2, ny_solid=3)


@pytest.fixture
def solid_material():
    return SolidMaterial(young_E=100.0, poisson_nu=0.3, density_rho_s=1.0)


@pytest.fixture
def fluid_material():
    return FluidMaterial(dyn_viscosity_mu=0.01, density_rho_f=1.0)


@pytest.fixture
def column_config_data():
    """Small rigid-block column run, tight tolerances."""
    return {
        "case": "pseudo_column",
        "column": {"nx_fluid": 2, "nx_solid": 1, "ny": 1},
        "drive": {"exponent": 2, "kind": "rigid_block", "p_inf": 0.0},
        "master": "structure",
        "dt": 0.02,
        "t_end": 0.1,
        "newton": {"field_tol": 1e-10, "interface_tol": 1e-10, "max_iterations": 10},
        "linear_solver": {"method": "dense_lu"},
    }


@pytest.fixture
def column_config(column_config_data):
    return CaseConfig.model_validate(column_config_data)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

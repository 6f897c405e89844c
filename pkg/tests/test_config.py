"""Tests for settings, schemas and the logging setup."""
import json
import logging

import pytest
from pydantic import ValidationError

from dualfsi.config import Settings
from dualfsi.core.exceptions import AssemblyError, FSIError, MeshParseError, add_context
from dualfsi.core.logging import JsonFormatter
from dualfsi.core.metrics import metrics_snapshot, newton_iterations_total
from dualfsi.schemas.case import CaseConfig
from dualfsi.schemas.schemes import ConversionRule, FluidTimeScheme, GenAlphaSolidParams


def test_settings_defaults():
    """Test the default settings."""
    settings = Settings()

    assert settings.APP_NAME == "dualfsi"
    assert settings.DENSE_LU_DOF_CAP == 600
    assert settings.JAX_ENABLE_X64 is True


def test_settings_environment_override(monkeypatch):
    """Test that environment variables override defaults."""
    monkeypatch.setenv("DENSE_LU_DOF_CAP", "50")
    monkeypatch.setenv("LOG_FORMAT", "text")

    settings = Settings()

    assert settings.DENSE_LU_DOF_CAP == 50
    assert settings.LOG_FORMAT == "text"


def test_case_config_forbids_unknown_keys(column_config_data):
    """Test that misspelled options are not silently ignored."""
    with pytest.raises(ValidationError):
        CaseConfig.model_validate({**column_config_data, "newton": {"max_iters": 3}})


def test_case_config_steps(column_config):
    """Test the step count from t_end and dt."""
    assert column_config.n_steps == 5


def test_conversion_rule_tau():
    """Test the velocity-to-displacement factor."""
    assert ConversionRule(kind="trapezoidal", dt=0.1).tau == pytest.approx(0.05)
    assert ConversionRule(kind="backward_euler", dt=0.1).tau == pytest.approx(0.1)


def test_solid_params_from_spectral_radius():
    """Test the generalized-α parameters for rho_inf = 1."""
    params = GenAlphaSolidParams(rho_inf=1.0)

    assert params.alpha_m == pytest.approx(0.5)
    assert params.alpha_f == pytest.approx(0.5)
    assert params.beta == pytest.approx(0.25)
    assert params.gamma == pytest.approx(0.5)


def test_fluid_scheme_label():
    """Test the scheme labels used in outputs."""
    assert FluidTimeScheme().label() == "gen_alpha(1)"
    assert FluidTimeScheme(kind="one_step_theta", theta=0.5).label() == "theta(0.5)"


def test_error_details():
    """Test default details, element prefixes and added context."""
    assert FSIError().detail == FSIError.default_detail
    assert AssemblyError("negative Jacobian", element=7).detail.startswith("element 7: ")
    exc = add_context(MeshParseError("bad node", line=3), "mesh.txt")

    assert exc.detail.startswith("mesh.txt: ")
    assert exc.line == 3


def test_json_formatter_includes_extra_fields():
    """Test that the JSON log line carries extra fields."""
    record = logging.makeLogRecord({"name": "dualfsi.test", "levelname": "INFO", "msg": "step done", "dt": 0.01})

    payload = json.loads(JsonFormatter().format(record))

    assert payload["message"] == "step done"
    assert payload["dt"] == 0.01
    assert payload["logger"] == "dualfsi.test"


def test_metrics_snapshot_tracks_counters():
    """Test that the snapshot reflects counter increments."""
    newton_iterations_total.labels(master="fluid").inc(3)

    snapshot = metrics_snapshot()

    assert snapshot["dualfsi_newton_iterations_total{master=fluid}"] >= 3.0

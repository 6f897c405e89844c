"""Tests for the command-line entry point."""
import json

import pytest

from dualfsi.main import EXIT_FSI_ERROR, main


@pytest.fixture
def column_file(tmp_path, column_config_data):
    path = tmp_path / "column.json"
    path.write_text(json.dumps({**column_config_data, "t_end": 0.04}))
    return path


def test_run_writes_diagnostics(column_file, tmp_path, capsys):
    """Test a successful column run from a config file."""
    out_dir = tmp_path / "out"

    code = main(["--output-dir", str(out_dir), "--log-level", "WARNING", "run", str(column_file)])

    assert code == 0
    assert (out_dir / "diagnostics_dt0.02.csv").exists()
    assert "2 steps" in capsys.readouterr().out


def test_invalid_config_exit_code(tmp_path, capsys):
    """Test that configuration errors exit with the error code and a message."""
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"case": "pseudo_column", "solver": "none"}))

    code = main(["--log-level", "WARNING", "run", str(path)])

    assert code == EXIT_FSI_ERROR
    err = capsys.readouterr().err
    assert err.splitlines()[0].startswith("error:")


def test_missing_config_file(tmp_path, capsys):
    """Test that a missing file is reported, not raised."""
    code = main(["--log-level", "WARNING", "run", str(tmp_path / "none.json")])

    assert code == EXIT_FSI_ERROR
    assert "not found" in capsys.readouterr().err


def test_metrics_file_written(column_file, tmp_path):
    """Test the prometheus text exposition after a run."""
    metrics = tmp_path / "metrics.prom"

    code = main([
        "--output-dir", str(tmp_path / "out"), "--metrics-file", str(metrics),
        "--log-level", "WARNING", "run", str(column_file),
    ])

    assert code == 0
    assert "dualfsi_newton_iterations_total" in metrics.read_text()


def test_dump_mortar_flag(column_file, tmp_path):
    """Test that --dump-mortar overrides the config file."""
    out_dir = tmp_path / "out"

    main(["--output-dir", str(out_dir), "--dump-mortar", "--log-level", "WARNING", "run", str(column_file)])

    assert (out_dir / "mortar_D.txt").exists()
    assert (out_dir / "mortar_P.txt").exists()


def test_unknown_predictor(column_file, capsys):
    """Test that unknown predictor names are rejected."""
    code = main(["--log-level", "WARNING", "study", "predictor", str(column_file), "--predictors", "const_dis,magic"])

    assert code == EXIT_FSI_ERROR
    assert "magic" in capsys.readouterr().err


def test_version(capsys):
    """Test the version flag."""
    with pytest.raises(SystemExit) as exc_info:
        main(["--version"])

    assert exc_info.value.code == 0
    assert "dualfsi" in capsys.readouterr().out

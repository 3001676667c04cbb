"""Experiment runner and CLI behavior: exit codes, determinism, file formats."""

import json
import math

import pytest

from kreinlab import ConfigError, ExperimentConfig, run_counting_experiment
from kreinlab.cli import main
from kreinlab.experiment import CSV_HEADER


def interval_config(**overrides):
    data = {
        "label": "interval-free",
        "domain": {"type": "interval", "lo": 0.0, "hi": 1.0, "h": 1.0 / 400},
        "lambda_grid": [10.0, 50.0, 100.0, 250.0, 500.0],
        "m": 1,
        "cphi_source": "free_field",
    }
    data.update(overrides)
    return data


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(interval_config(lambda_grid=[-1.0, 2.0]))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(interval_config(lambda_grid=[5.0, 5.0]))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(interval_config(lambda_grid=[]))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(interval_config(cphi_source="guess"))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(interval_config(cphi_source="explicit"))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(interval_config(typo_key=1))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(interval_config(domain={"type": "interval", "lo": 0, "hi": 1}))


def test_interval_experiment_counts():
    cfg = ExperimentConfig.from_mapping(interval_config())
    report = run_counting_experiment(cfg)
    assert report.passed
    by_lambda = {row["lambda"]: row for row in report.rows}
    # analytic Dirichlet pi^2 j^2 and buckling values 4 pi^2, 80.76 decide these
    assert by_lambda[50.0]["N_K"] == 1
    assert by_lambda[50.0]["N_F"] == 2
    assert by_lambda[100.0]["N_K"] == 2
    assert by_lambda[100.0]["N_F"] == 3
    assert all(row["trusted"] for row in report.rows)
    assert report.metadata["cphi"] == pytest.approx(399.0 / 400.0)


def test_free_field_guard_for_nontrivial_coefficients():
    cfg = ExperimentConfig.from_mapping(
        interval_config(coefficients={"q": "indicator(0.4, 0.6, x1)"})
    )
    with pytest.raises(ConfigError, match="free_field"):
        run_counting_experiment(cfg)


def test_explicit_cphi_accepted():
    cfg = ExperimentConfig.from_mapping(
        interval_config(
            coefficients={"q": "indicator(0.4, 0.6, x1)"},
            cphi_source="explicit",
            cphi_value=1.0,
        )
    )
    report = run_counting_experiment(cfg)
    assert report.passed


def test_untrusted_rows_dropped_by_default():
    cfg = ExperimentConfig.from_mapping(
        interval_config(
            domain={"type": "interval", "lo": 0.0, "hi": 1.0, "h": 0.05},
            lambda_grid=[10.0, 100.0, 1e5],
        )
    )
    report = run_counting_experiment(cfg)
    assert [row["lambda"] for row in report.rows] == [10.0, 100.0]
    cfg.allow_untrusted = True
    report = run_counting_experiment(cfg)
    assert [row["trusted"] for row in report.rows] == [True, True, False]


def test_csv_deterministic(tmp_path):
    cfg = ExperimentConfig.from_mapping(interval_config())
    one = tmp_path / "a.csv"
    two = tmp_path / "b.csv"
    run_counting_experiment(cfg).write_csv(one)
    run_counting_experiment(cfg).write_csv(two)
    assert one.read_bytes() == two.read_bytes()
    header = one.read_text().splitlines()[0]
    assert header == CSV_HEADER


def test_cli_counting_roundtrip(tmp_path):
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(json.dumps(interval_config()))
    code = main(["counting", "--config", str(cfg_path), "--out", str(tmp_path)])
    assert code == 0
    csv = (tmp_path / "interval-free.csv").read_text().splitlines()
    assert csv[0] == CSV_HEADER
    assert len(csv) == 6
    report = json.loads((tmp_path / "interval-free.json").read_text())
    assert report["passed"] is True
    assert report["metadata"]["n_nodes"] == 399


def test_cli_config_error_exit_code(tmp_path):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps(interval_config(lambda_grid=[3.0, 1.0])))
    assert main(["counting", "--config", str(cfg_path), "--out", str(tmp_path)]) == 4
    assert main(["counting", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path)]) == 4


def test_cli_minimize():
    assert main(["minimize", "-n", "2", "-m", "1"]) == 0


def test_cli_bounds(tmp_path):
    code = main([
        "bounds", "-n", "2", "-m", "1", "--cphi", "1.0",
        "--lambdas", "10", "50", "100", "--out", str(tmp_path),
    ])
    assert code == 0
    lines = (tmp_path / "bounds_n2_m1.csv").read_text().splitlines()
    assert lines[0] == "lambda,krein_bound,friedrichs_bound"
    lam, kb, fb = map(float, lines[2].split(","))
    assert kb == pytest.approx(75.0 / (4 * math.pi), rel=1e-12)
    assert fb == pytest.approx(100.0 / (4 * math.pi), rel=1e-12)


def test_cli_spectrum_and_buckling(tmp_path):
    cfg = {
        "label": "small",
        "domain": {"type": "interval", "lo": 0.0, "hi": 1.0, "h": 0.02},
        "m": 1,
        "k": 3,
    }
    cfg_path = tmp_path / "prob.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["spectrum", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "small.csv").read_text().splitlines()
    assert lines[0] == "index,eigenvalue,residual,trusted"
    assert float(lines[1].split(",")[1]) == pytest.approx(math.pi**2, rel=0.01)
    assert main(["buckling", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "small.csv").read_text().splitlines()
    # the zero-extension closure converges first order; h = 0.02 sits near 4%
    assert float(lines[1].split(",")[1]) == pytest.approx(4 * math.pi**2, rel=0.06)


def test_cli_lswaves(tmp_path):
    cfg = {
        "label": "waves",
        "domain": {"type": "interval", "lo": 0.0, "hi": 1.0, "h": 0.05},
        "scattering": {
            "q0": 0.5, "lo": 0.3, "hi": 0.7, "n": 240,
            "xi_grid": [[1.0], [2.0], [-2.0]],
        },
    }
    cfg_path = tmp_path / "ls.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["lswaves", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "waves.csv").read_text().splitlines()
    assert lines[0] == "xi_1,x_1,re_phi,im_phi"
    data = json.loads((tmp_path / "waves_cphi.json").read_text())
    assert data["grid_size"] == 3
    assert data["cphi"] > 0


def test_cli_verify_fast_and_mutation():
    assert main(["verify", "--level", "fast"]) == 0
    assert main(["verify", "--level", "fast", "--debug-collapse-pencil"]) == 1


def test_scattering_cphi_source():
    cfg = ExperimentConfig.from_mapping(
        interval_config(
            domain={"type": "interval", "lo": 0.0, "hi": 1.0, "h": 0.02},
            lambda_grid=[50.0, 100.0],
            coefficients={"q": "0.01 * indicator(0.3, 0.7, x1)"},
            cphi_source="scattering",
            scattering={
                "q0": 0.01, "lo": 0.3, "hi": 0.7, "n": 300,
                "xi_grid": [[1.0], [3.0], [9.0]],
            },
        )
    )
    report = run_counting_experiment(cfg)
    assert report.passed
    assert report.metadata["cphi"] == pytest.approx(
        report.metadata["volume"], rel=0.02
    )

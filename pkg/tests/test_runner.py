"""
Tests for config loading, the experiment runner, artifact output and the
command line entry point.
"""

import os

import orjson
import pandas as pd
import pytest
import yaml
from pydantic import ValidationError

import levytree_lab
from app.models import ConfigError, ExperimentResult, LabConfig, LabSettings
from app.services import ExperimentRunner, load_config
from app.tools.artifact_writer import ArtifactWriter, dumps_json, emit_summary

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
MECH_REPORT = os.path.join(ROOT, "config", "mech_report_stable2.yaml")


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.delenv("LEVYTREE_LAB_OUTPUT_DIR", raising=False)
    monkeypatch.delenv("LEVYTREE_LAB_WORKERS", raising=False)


@pytest.fixture
def write_config(tmp_path):
    def _write(document, name="config.yaml"):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(document), encoding="utf-8")
        return str(path)
    return _write


@pytest.fixture
def quiet_runner():
    return ExperimentRunner(writer=ArtifactWriter(verbose=False), verbose=False)


def _doubling_config(tmp_path, **mechanism):
    return LabConfig(
        experiment="doubling",
        mechanism=mechanism or {"kind": "stable", "gamma": 2.0},
        scales={"doubling_steps": 5},
        output={"directory": str(tmp_path)},
    )


def test_load_config_with_overrides():
    config = load_config(MECH_REPORT, ["scales.lambda_points=12", "output.directory=elsewhere", "seeds=[3, 4]"],
                         settings=LabSettings())
    assert config.experiment == "mech-report"
    assert config.mechanism.gamma == 2.0
    assert config.scales.lambda_points == 12
    assert config.output.directory == "elsewhere"
    assert config.seeds == [3, 4]


def test_environment_settings_lose_to_overrides(monkeypatch):
    monkeypatch.setenv("LEVYTREE_LAB_OUTPUT_DIR", "from-env")
    assert load_config(MECH_REPORT).output.directory == "from-env"
    assert load_config(MECH_REPORT, ["output.directory=from-cli"]).output.directory == "from-cli"
    assert load_config(MECH_REPORT, settings=LabSettings(workers=3)).workers == 3


def test_load_config_errors(tmp_path, write_config):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.yaml"))

    broken = tmp_path / "broken.yaml"
    broken.write_text("experiment: [doubling\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(broken))

    with pytest.raises(ConfigError):
        load_config(write_config([1, 2], "list.yaml"))
    with pytest.raises(ConfigError):
        load_config(MECH_REPORT, ["no-equals-sign"])


@pytest.mark.parametrize("document", [
    {"experiment": "mech-report", "colour": "blue"},
    {"experiment": "mech-report", "scales": {"lambda_points": 1}},
    {"experiment": "density"},
    {"experiment": "density", "seeds": [-1]},
    {"experiment": "not-an-experiment"},
])
def test_schema_violations(write_config, document):
    with pytest.raises(ValidationError):
        load_config(write_config(document), settings=LabSettings())


def test_registry_lists_every_experiment(quiet_runner):
    names = [name for name, _ in quiet_runner.list_experiments()]
    assert len(names) == 9
    assert {"mech-report", "doubling", "spine-laplace", "packing-ratio", "geometry"} <= set(names)
    assert all(description for _, description in quiet_runner.list_experiments())


def test_doubling_run_writes_artifacts(tmp_path, quiet_runner):
    code, state = quiet_runner.run_experiment(_doubling_config(tmp_path))
    assert code == 0
    assert not state.errors
    assert state.result.passed
    assert state.get_check_summary() == {"passed": 1, "failed": 0, "reported": 0}

    (run_dir,) = [p for p in tmp_path.iterdir() if p.is_dir()]
    assert run_dir.name.startswith("doubling_stable")
    assert {"summary.json", "report.md", "manifest.json", "doubling.csv"} <= {p.name for p in run_dir.iterdir()}

    summary = orjson.loads((run_dir / "summary.json").read_bytes())
    assert summary["passed"] is True
    assert summary["config"]["scales"]["doubling_steps"] == 5

    manifest = orjson.loads((run_dir / "manifest.json").read_bytes())
    assert sorted(entry["path"] for entry in manifest["files"]) == ["doubling.csv", "report.md", "summary.json"]
    assert len(pd.read_csv(run_dir / "doubling.csv")) == 5


def test_failed_checks_only_fail_strict_runs(tmp_path, quiet_runner):
    def failing(config, mech):
        """Always fails"""
        result = ExperimentResult(experiment=config.experiment, summary={"mechanism": {"label": "stub"}})
        result.add_check("never", False, 1.0, 0.0)
        result.add_check("report", None, 2.0)
        return result

    quiet_runner.registry["doubling"] = failing
    config = _doubling_config(tmp_path)
    assert quiet_runner.run_experiment(config)[0] == 0
    code, state = quiet_runner.run_experiment(config, strict=True)
    assert code == 1
    assert state.get_check_summary() == {"passed": 0, "failed": 1, "reported": 1}
    assert (tmp_path / "doubling_stub" / "summary.json").exists()


def test_runtime_failure_is_recorded(tmp_path, quiet_runner):
    def broken(config, mech):
        raise RuntimeError("boom")

    quiet_runner.registry["doubling"] = broken
    code, state = quiet_runner.run_experiment(_doubling_config(tmp_path))
    assert code == 1
    assert "RuntimeError: boom" in state.errors
    summary = orjson.loads((tmp_path / "doubling_run" / "summary.json").read_bytes())
    assert summary["passed"] is None
    assert summary["errors"] == ["RuntimeError: boom"]


def test_rejected_mechanism_exits_two(tmp_path, quiet_runner):
    code, state = quiet_runner.run_experiment(_doubling_config(tmp_path, kind="stable", gamma=2.5))
    assert code == 2
    assert state.errors and state.manifest is None


def test_geometry_config_uses_fine_local_time_grid():
    config = load_config(os.path.join(ROOT, "config", "geometry_stable2.yaml"), settings=LabSettings())
    assert config.scales.local_time_epsilon == config.scales.local_time_delta == 0.01
    assert config.tolerances.local_time_rtol == 0.10
    assert 1.0 / config.scales.walk_scale <= 1e-4
    assert LabConfig(experiment="geometry", seeds=[1]).scales.local_time_epsilon == 0.01


def test_density_median_is_decided(tmp_path, quiet_runner):
    config = load_config(os.path.join(ROOT, "config", "density_smoke.yaml"), [f"output.directory={tmp_path}"],
                         settings=LabSettings())
    _, state = quiet_runner.run_experiment(config)
    assert not state.errors
    checks = {check.name: check for check in state.result.checks}
    median = checks["density_median"]
    lo, hi = median.threshold
    assert median.passed is (lo <= median.value <= hi)
    assert median.details["target"] == 1.0


def test_counterexample_report_pairs_delta_with_slope_floor(tmp_path, quiet_runner):
    config = load_config(os.path.join(ROOT, "config", "counterexample_15.yaml"),
                         ["scales.exponent_points=1000", f"output.directory={tmp_path}"], settings=LabSettings())
    _, state = quiet_runner.run_experiment(config)
    assert not state.errors
    checks = {check.name: check for check in state.result.checks}
    assert checks["local_slope_floor"].details["delta_hat"] == checks["delta_hat"].value
    assert checks["delta_hat"].passed is None

    (report,) = tmp_path.rglob("report.md")
    row = next(line for line in report.read_text(encoding="utf-8").splitlines()
               if line.startswith("| local_slope_floor |"))
    assert f"delta_hat={checks['delta_hat'].value}" in row


def test_emit_summary_without_result():
    config = {"experiment": "doubling"}
    document = emit_summary(None, config, "1.0.0")
    assert document["passed"] is None
    assert document["checks"] == [] and document["experiment"] == "doubling"
    assert dumps_json({"b": 0.1, "a": float("inf")}) == b'{\n  "a": "inf",\n  "b": 0.1\n}\n'


def test_main_commands(tmp_path, write_config, capsys):
    assert levytree_lab.main(["list-experiments"]) == 0
    assert "mech-report" in capsys.readouterr().out

    assert levytree_lab.main(["validate", MECH_REPORT]) == 0
    assert levytree_lab.main(["validate", str(tmp_path / "missing.yaml")]) == 2
    assert levytree_lab.main(["validate", write_config({"experiment": "density"})]) == 2

    config = write_config({"experiment": "doubling", "mechanism": {"kind": "stable", "gamma": 2.0}})
    code = levytree_lab.main(["run", config, "scales.doubling_steps=5", f"output.directory={tmp_path / 'out'}"])
    assert code == 0
    assert any((tmp_path / "out").rglob("summary.json"))

"""
Test Suite for the Command Line

Drives the analyze, simulate, reproduce, presets and schema commands through click's
test runner and checks exit statuses, written files and report contents.

Dependencies:
    - Pytest for unit testing and temporary directories
    - click.testing.CliRunner for invoking commands
"""
import json

import pytest
from click.testing import CliRunner

from config import TRACE_CSV_HEADER
from app.config_loader import canonical_json, load_config
from app.exceptions import USAGE_EXIT_CODE
from commands.reproduce import jitter_sweep_checks
from main import cli
from models.schemas import AnalysisReport, ReproduceReport, SimulationReport

runner = CliRunner()


def loop_config(tau: float) -> dict:
    return {
        "version": 1,
        "nodes": [{"id": 1}, {"id": 2, "r": 1.00002, "x0": 0.001}, {"id": 3, "r": 0.999985, "x0": -0.002}],
        "edges": [{"from": 2, "to": 1}, {"from": 3, "to": 1}, {"from": 2, "to": 3}, {"from": 3, "to": 2}],
        "params": {"profile": "eq15", "tau": tau},
        "run": {"steps": 400, "seed": 3},
    }

###############################################################################
#                                 Analyze                                     #
###############################################################################
def test_analyze_stable_star(write_config, star_config, tmp_path):
    """Test that the star is stable, exits 0 and reports xi and the prediction."""
    out = tmp_path / "analysis.json"
    result = runner.invoke(cli, ["analyze", str(write_config(star_config)), "-o", str(out)])
    assert result.exit_code == 0, result.output
    report = AnalysisReport.model_validate_json(out.read_text())
    assert report.stability.verdict.value == "stable"
    assert report.topology_source == "initial"
    assert report.xi == pytest.approx([1.0, 0.0], abs=1e-12)
    assert report.prediction.r_star == pytest.approx(1.0)

@pytest.mark.parametrize("tau, status", [(1.0, 2), (0.5, 0)])
def test_analyze_loop(write_config, tmp_path, tau, status):
    """Test the loop verdict on either side of its 847.8 ms bound."""
    out = tmp_path / "analysis.json"
    result = runner.invoke(cli, ["analyze", str(write_config(loop_config(tau))), "-o", str(out)])
    assert result.exit_code == status, result.output
    assert json.loads(out.read_text())["exit_status"] == status

def test_analyze_large_p_unstable(write_config, star_config, tmp_path):
    """Test that p = 2.5 is reported unstable with exit 2."""
    star_config["params"]["p"] = 2.5
    result = runner.invoke(cli, ["analyze", str(write_config(star_config)), "-o", str(tmp_path / "a.json")])
    assert result.exit_code == 2

def test_analyze_complex_spectrum_not_covered(write_config, tmp_path):
    """Test that a directed cycle exits 3."""
    config = {
        "version": 1,
        "nodes": [{"id": 1}, {"id": 2}, {"id": 3}],
        "edges": [{"from": 1, "to": 2}, {"from": 2, "to": 3}, {"from": 3, "to": 1}],
        "params": {"profile": "eq15", "tau": 0.2},
        "run": {"steps": 10, "seed": 1},
    }
    result = runner.invoke(cli, ["analyze", str(write_config(config)), "-o", str(tmp_path / "a.json")])
    assert result.exit_code == 3

def test_analyze_invalid_json_points_at_line(write_config):
    """Test that malformed JSON exits 1 with a path:line anchor."""
    path = write_config('{\n  "version": 1,\n  "nodes": [,\n}\n')
    result = runner.invoke(cli, ["analyze", str(path)])
    assert result.exit_code == 1
    assert f"{path}:3:" in result.output

def test_analyze_unknown_key_rejected(write_config, star_config):
    """Test that an unknown key in a section is a configuration error."""
    star_config["run"]["bogus"] = 1
    result = runner.invoke(cli, ["analyze", str(write_config(star_config))])
    assert result.exit_code == 1
    assert "bogus" in result.output

def test_analyze_missing_file(tmp_path):
    """Test that an unreadable path exits 1."""
    result = runner.invoke(cli, ["analyze", str(tmp_path / "absent.json")])
    assert result.exit_code == 1

def test_explicit_weights_required(write_config, star_config):
    """Test that explicit mode needs alpha on every edge."""
    star_config["weights"] = {"mode": "explicit"}
    result = runner.invoke(cli, ["analyze", str(write_config(star_config))])
    assert result.exit_code == 1

def test_jitter_off_the_granularity_grid_rejected(write_config, star_config):
    """Test that a jitter max that is not a whole number of ticks exits 1 naming the jitter section."""
    star_config["jitter"] = {"kind": "uniform-ping-pong", "max": 0.0105, "granularity": 0.001}
    result = runner.invoke(cli, ["analyze", str(write_config(star_config))])
    assert result.exit_code == 1
    assert "not a multiple of the granularity" in result.output

###############################################################################
#                                Simulate                                     #
###############################################################################
def test_simulate_writes_outputs(write_config, star_config, tmp_path):
    """Test the trace, the config echo and a schema-valid report."""
    out = tmp_path / "run"
    result = runner.invoke(cli, ["simulate", str(write_config(star_config)), "-o", str(out)])
    assert result.exit_code == 0, result.output

    lines = (out / "trace.csv").read_text().splitlines()
    assert lines[0] == ",".join(TRACE_CSV_HEADER)
    assert len(lines) == 1 + 300 * 2
    report = SimulationReport.model_validate_json((out / "report.json").read_text())
    assert report.status.value == "completed"
    assert report.metrics.converged
    assert report.metrics.empirical_r_star == pytest.approx(1.0, abs=1e-9)
    assert report.trace_csv == "trace.csv"

def test_simulate_same_seed_same_bytes(write_config, star_config, tmp_path):
    """Test that two runs of one jittered config write identical traces."""
    star_config["jitter"] = {"kind": "uniform-ping-pong", "max": 0.01, "granularity": 0.001}
    path = str(write_config(star_config))
    for name in ("a", "b"):
        assert runner.invoke(cli, ["simulate", path, "-o", str(tmp_path / name)]).exit_code == 0
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()

def test_simulate_divergence_exits_2(write_config, tmp_path):
    """Test that the unstable loop halts as diverged with exit 2."""
    config = loop_config(1.0)
    config["run"]["divergence_threshold"] = 1.0
    out = tmp_path / "run"
    result = runner.invoke(cli, ["simulate", str(write_config(config)), "-o", str(out)])
    assert result.exit_code == 2
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "diverged"
    assert report["steps_recorded"] == report["diverged_at"] + 1

def test_config_echo_round_trip(write_config, star_config, tmp_path):
    """Test that reloading the canonical echo gives identical bytes."""
    out = tmp_path / "run"
    runner.invoke(cli, ["simulate", str(write_config(star_config)), "-o", str(out)])
    echo = (out / "config.json").read_text()
    assert canonical_json(load_config(out / "config.json").file) == echo

###############################################################################
#                               Reproduce                                     #
###############################################################################
def test_reproduce_exp1(tmp_path):
    """Test that the star and loop experiments pass their checks."""
    result = runner.invoke(cli, ["reproduce", "exp1", "-o", str(tmp_path)])
    assert result.exit_code == 0, result.output
    report = ReproduceReport.model_validate_json((tmp_path / "reproduce.json").read_text())
    assert report.verdict == "pass"
    assert len(report.runs) == 3
    assert (tmp_path / "exp1-loop-unstable" / "trace.csv").exists()

def test_reproduce_naive(tmp_path):
    """Test that the naive scheme shows its growing oscillation."""
    result = runner.invoke(cli, ["reproduce", "naive-instability", "-o", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert "[PASS] naive-instability: diverged" in result.output

def test_reproduce_records_overrides(tmp_path):
    """Test that seed and tau overrides land in the report and the config echo."""
    result = runner.invoke(cli, ["reproduce", "exp1-star", "--seed", "4", "--tau", "0.5", "-o", str(tmp_path)])
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "reproduce.json").read_text())
    assert report["overrides"] == {"seed": 4, "tau": 0.5}
    echo = json.loads((tmp_path / "exp1-star" / "config.json").read_text())
    assert echo["preset"]["overrides"]["tau"] == 0.5

def test_reproduce_unknown_preset(tmp_path):
    """Test that an unknown preset is a usage error with its own exit status."""
    result = runner.invoke(cli, ["reproduce", "exp9", "-o", str(tmp_path)])
    assert result.exit_code == USAGE_EXIT_CODE == 64
    assert "Invalid value" in result.output

def test_unknown_command_is_a_usage_error():
    """Test that an unknown subcommand and an unknown option exit 64, not 2."""
    assert runner.invoke(cli, ["calibrate"]).exit_code == USAGE_EXIT_CODE
    assert runner.invoke(cli, ["presets", "--bogus"]).exit_code == USAGE_EXIT_CODE

@pytest.mark.slow
def test_reproduce_wheel_sweep(tmp_path):
    """Test that the wheel sweep passes over five seeds with a K=0 / K=4 ratio of at least 2."""
    result = runner.invoke(cli, ["reproduce", "exp2", "-o", str(tmp_path)])
    assert result.exit_code == 0, result.output
    report = ReproduceReport.model_validate_json((tmp_path / "reproduce.json").read_text())
    assert report.verdict == "pass"
    assert len(report.runs) == 25
    ratio = next(check for check in report.checks if check.name.startswith("exp2: mean sqrt_S_n ratio"))
    assert ratio.passed and ratio.value >= 2.0
    trend = next(check for check in report.checks if check.name == "exp2: negative trend in K")
    assert trend.value >= 4

@pytest.mark.slow
def test_reproduce_jitter_sweep(tmp_path):
    """Test that the skewless client stays at or below both offset-correcting schemes across the sweep."""
    result = runner.invoke(cli, ["reproduce", "exp4", "-o", str(tmp_path)])
    assert result.exit_code == 0, result.output
    report = ReproduceReport.model_validate_json((tmp_path / "reproduce.json").read_text())
    assert report.verdict == "pass"
    assert len(report.runs) == 9
    sweep = [check for check in report.checks if check.name.startswith("exp4: skewless <=")]
    assert len(sweep) == 2
    assert all(check.passed and check.value < 1.0 for check in sweep)
    assert "[PASS] exp4: skewless <= offset-plus-freq" in result.output

def test_jitter_sweep_checks_pass_and_fail():
    """Test the sweep grading on hand-made deviations, including the noiseless point."""
    good = {0: {2: 1e-13, 3: 0.0, 4: 2e-13}, 20: {2: 1e-6, 3: 4e-6, 4: 3e-6}, 40: {2: 2e-6, 3: 8e-6, 4: 5e-6}}
    checks = jitter_sweep_checks(good)
    assert [check.name for check in checks] == ["exp4: skewless <= offset-plus-freq", "exp4: skewless <= skew-and-offset"]
    assert all(check.passed for check in checks)
    assert checks[0].value == pytest.approx(0.25)
    assert checks[1].value == pytest.approx(0.4)

    bad = {20: {2: 1e-6, 3: 4e-6, 4: 3e-6}, 40: {2: 6e-6, 3: 8e-6, 4: 5e-6}}
    checks = jitter_sweep_checks(bad)
    assert checks[0].passed
    assert not checks[1].passed
    assert "[40]" in checks[1].detail

def test_jitter_sweep_checks_missing_node():
    """Test that a sweep point without the skewless client fails every baseline."""
    checks = jitter_sweep_checks({20: {3: 4e-6, 4: 3e-6}})
    assert not any(check.passed for check in checks)

###############################################################################
#                           Presets and Schemas                               #
###############################################################################
def test_presets_listing():
    """Test that suites, presets and profiles are listed."""
    result = runner.invoke(cli, ["presets"])
    assert result.exit_code == 0
    for name in ("exp1", "exp2-wheel-4", "step-response", "eq17"):
        assert name in result.output

def test_schema_export(tmp_path):
    """Test that the four JSON schemas are written and parse."""
    result = runner.invoke(cli, ["schema", "-o", str(tmp_path)])
    assert result.exit_code == 0
    names = sorted(path.name for path in tmp_path.iterdir())
    assert names == ["analysis-report.schema.json", "config.schema.json", "reproduce-report.schema.json",
                     "simulation-report.schema.json"]
    config_schema = json.loads((tmp_path / "config.schema.json").read_text())
    assert "nodes" in config_schema["properties"]

def test_version():
    """Test the version flag."""
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert "1.0.0" in result.output


def test_export_presets_load_back(tmp_path):
    """Test that every exported preset file loads as a configuration."""
    from scripts.export_presets import export_presets

    written = export_presets(tmp_path, seed=2)
    assert len(written) == 20
    for path in written:
        loaded = load_config(path)
        assert loaded.file.preset.overrides == {"seed": 2}

"""
Simulate Command

Runs a configuration, writes the trace CSV and the simulation report.

Dependencies:
    - click for the command line
    - Simulation engine, metrics and reporting modules
"""
from pathlib import Path

import click

from app.config_loader import LoadedConfig, canonical_json, load_config
from app.exceptions import SkewlessError
from app.metrics import count_sign_changes, growth_ratio, per_node_deviation, summarize
from app.reporting import write_report, write_trace_csv
from app.sim_engine import run
from commands.analyze import analyze_loaded
from models.models import RunStatus, Trace
from models.schemas import AnalysisReport, OscillationReport, SimulationReport

GROWTH_WINDOW_END = 200


def _oscillation(trace: Trace) -> OscillationReport:
    clients = [node for node in trace.node_ids if node != trace.reference_node]
    ratio = None
    if trace.steps >= GROWTH_WINDOW_END:
        try:
            ratio = growth_ratio(trace)
        except ZeroDivisionError:
            # no offset at all in the early window
            ratio = None
    return OscillationReport(
        sign_changes={node: count_sign_changes(trace, node) for node in clients},
        growth_ratio=ratio,
    )


def simulation_report(loaded: LoadedConfig, trace: Trace, out_dir: str | Path, name: str | None = None,
                      analysis: AnalysisReport | None = None) -> SimulationReport:
    """
    Write the trace, the config echo and the report of a finished run into out_dir.

    Args:
        loaded (LoadedConfig): Configuration that produced the trace.
        trace (Trace): Finished run.
        out_dir (str | Path): Directory for trace.csv, config.json and report.json.
        name (str, optional): Run label stored in the report.
        analysis (AnalysisReport, optional): Analysis of the same configuration; computed when omitted.

    Returns:
        SimulationReport: The report as written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = write_trace_csv(trace, out_dir / "trace.csv")
    (out_dir / "config.json").write_text(canonical_json(loaded.file), encoding="utf-8")

    analysis = analysis or analyze_loaded(loaded)
    has_clients = len(trace.node_ids) > 1
    report = SimulationReport(
        name=name,
        config=loaded.source,
        preset=loaded.file.preset,
        seed=trace.seed,
        status=trace.status,
        diverged_at=trace.diverged_at,
        steps_recorded=trace.steps,
        stability_verdict=analysis.stability.verdict,
        prediction=analysis.prediction,
        metrics=summarize(trace) if has_clients else None,
        per_node_deviation=per_node_deviation(trace) if has_clients else {},
        oscillation=_oscillation(trace) if has_clients else None,
        trace_csv=trace_path.name,
        exit_status=0 if trace.status is RunStatus.COMPLETED else 2,
    )
    write_report(report, out_dir / "report.json")
    return report


@click.command("simulate")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("-o", "--out-dir", "out_dir", type=click.Path(file_okay=False), required=True,
              help="Directory for trace.csv and report.json.")
def simulate(config_path: str, out_dir: str):
    """Run CONFIG_PATH and write its trace and metrics. Exit 2 when the run diverges."""
    try:
        loaded = load_config(config_path)
        report = simulation_report(loaded, run(loaded.simulation), out_dir)
    except SkewlessError as err:
        click.echo(err.detail, err=True)
        raise SystemExit(err.exit_code)

    click.echo(f"{report.status.value}: {report.steps_recorded} steps written to {out_dir}")
    raise SystemExit(report.exit_status)

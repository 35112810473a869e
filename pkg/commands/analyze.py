"""
Analyze Command

Runs the stability analysis of a configuration and writes the analysis report.
The topology analysed is the one in force at the end of the run.

Dependencies:
    - click for the command line
    - Stability and topology modules for the verdicts, xi and gamma
    - Logging for the verdict
"""
import logging

import click

from app.config_loader import LoadedConfig, canonical_json, load_config
from app.exceptions import SkewlessError
from app.reporting import write_report
from app.stability import full_stability_report, jordan_chain, predict_fixed_point
from app.topology import build_laplacian
from models.models import Verdict
from models.schemas import AnalysisReport

VERDICT_EXIT = {Verdict.STABLE: 0, Verdict.UNSTABLE: 2, Verdict.NOT_COVERED: 3}


# -----------------------------------
# Analysis
# -----------------------------------
def _topology_source(loaded: LoadedConfig) -> str:
    swaps = [e.step for e in loaded.simulation.events
             if e.topology is not None and e.step < loaded.simulation.steps]
    return f"set-edges at step {max(swaps)}" if swaps else "initial"


def analyze_loaded(loaded: LoadedConfig) -> AnalysisReport:
    """
    Build the analysis report of a loaded configuration.

    xi and gamma are reported for connected graphs with p > 0 and kappa1 != kappa2. The
    fixed-point prediction needs the initial states to belong to the analysed topology,
    so it is left out when set-edges events change the graph.
    """
    config = loaded.simulation
    r = [node.r for node in config.nodes]
    stability = full_stability_report(loaded.final_topology, r, config.params)

    xi = gamma = prediction = None
    params = config.params
    if stability.connected and params.p > 0 and params.delta_kappa != 0:
        chain = jordan_chain(build_laplacian(loaded.final_topology), r, params)
        xi, gamma = [float(v) for v in chain.xi], chain.gamma
        if _topology_source(loaded) == "initial":
            prediction = predict_fixed_point(
                [node.x0 for node in config.nodes], [node.s0 for node in config.nodes],
                [node.y0 for node in config.nodes], chain.xi, chain.gamma, params, r,
            )

    logging.info(f"{loaded.source}: verdict {stability.verdict.value}")
    return AnalysisReport(
        config=loaded.source,
        preset=loaded.file.preset,
        topology_source=_topology_source(loaded),
        stability=stability,
        xi=xi,
        gamma=gamma,
        prediction=prediction,
        exit_status=VERDICT_EXIT[stability.verdict],
    )


# -----------------------------------
# Command
# -----------------------------------
@click.command("analyze")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("-o", "--output", "output", type=click.Path(dir_okay=False), default=None,
              help="Report file; the report is printed when omitted.")
def analyze(config_path: str, output: str | None):
    """Check the stability of CONFIG_PATH. Exit 0 stable, 2 unstable, 3 not covered."""
    try:
        report = analyze_loaded(load_config(config_path))
    except SkewlessError as err:
        click.echo(err.detail, err=True)
        raise SystemExit(err.exit_code)

    if output:
        write_report(report, output)
    else:
        click.echo(canonical_json(report), nl=False)
    raise SystemExit(report.exit_status)

"""
Main Application Entry Point

This module builds the command-line group, configures logging and registers the
analysis, simulation and reproduction commands.

Dependencies:
    - click for the command line
    - Application-specific modules (presets, schemas, commands)
"""
import logging

import click

from config import LOG_FORMAT, LOG_LEVEL
from app.exceptions import USAGE_EXIT_CODE
from app.presets import PROFILES, SUITES, ExperimentPreset
from app.reporting import write_schemas
from commands import analyze, reproduce, simulate
from models.schemas import PUBLISHED_SCHEMAS


# -----------------------------------
# Command Group
# -----------------------------------
class SkewlessGroup(click.Group):
    """Group whose usage errors exit with USAGE_EXIT_CODE, apart from the verdict statuses 2 and 3."""

    def make_context(self, *args, **kwargs):
        try:
            return super().make_context(*args, **kwargs)
        except click.UsageError as err:
            err.exit_code = USAGE_EXIT_CODE
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as err:
            err.exit_code = USAGE_EXIT_CODE
            raise


@click.group(cls=SkewlessGroup)
@click.version_option("1.0.0", prog_name="skewless")
def cli():
    """Skewless clock synchronization: stability analysis, simulation and experiment reproduction."""
    logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT)


# -----------------------------------
# Register Commands
# -----------------------------------
cli.add_command(analyze.analyze)        # Stability verdict of a config
cli.add_command(simulate.simulate)      # Trace and metrics of a config
cli.add_command(reproduce.reproduce)    # Graded experiment presets


@cli.command("presets")
def list_presets():
    """List experiment presets, suites and parameter profiles."""
    click.echo("Suites:")
    for name, members in sorted(SUITES.items()):
        click.echo(f"  {name}: {', '.join(preset.value for preset in members)}")
    click.echo("Presets:")
    for preset in ExperimentPreset:
        click.echo(f"  {preset.value}")
    click.echo("Profiles:")
    for name, params in sorted(PROFILES.items()):
        click.echo(f"  {name}: kappa1={params.kappa1} kappa2={params.kappa2} p={params.p} tau={params.tau} c={params.c}")


@cli.command("schema")
@click.option("-o", "--out-dir", "out_dir", type=click.Path(file_okay=False), required=True)
def schema(out_dir: str):
    """Write the JSON schemas of the config file and the reports."""
    for path in write_schemas(PUBLISHED_SCHEMAS, out_dir):
        click.echo(str(path))


if __name__ == "__main__":
    cli()

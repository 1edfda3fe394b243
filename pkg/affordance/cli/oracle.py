# affordance/cli/oracle.py
"""
Exact per-state values for every demon in the config.
"""
import click

from affordance.cli.common import experiment_options, open_experiment


@click.command('oracle')
@experiment_options
def oracle(config_path, seed, out, quiet):
    """Solve each demon's GVF exactly and write v and q per state."""
    service, run = open_experiment('oracle', config_path, seed, out, quiet)
    with run:
        frame = service.run_oracle()
    if not quiet:
        click.echo(f"Wrote {len(frame)} oracle rows to {service.output_path(service.config.output.oracle)}")

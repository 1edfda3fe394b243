# affordance/cli/demo.py
"""
Control scenarios that act on learned predictions.
"""
import click

from affordance.cli.common import experiment_options, open_experiment
from affordance.services.experiment import DEMOS


@click.command('demo')
@click.argument('which', type=click.Choice(DEMOS))
@experiment_options
def demo(which, config_path, seed, out, quiet):
    """Run the pavlovian, chain, psr or whatif scenario and write its report."""
    service, run = open_experiment(f'demo-{which}', config_path, seed, out, quiet)
    with run:
        frame = service.run_demo(which)
    if not quiet:
        click.echo(f"{which}: {len(frame) - 1} row(s), summary {frame.iloc[-1].to_dict()}")

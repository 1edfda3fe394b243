# affordance/cli/learn.py
"""
Learn every demon from one behavior stream.
"""
import click

from affordance.cli.common import experiment_options, open_experiment


@click.command('learn')
@experiment_options
def learn(config_path, seed, out, quiet):
    """Run the behavior policy, write the run log and save one model per demon."""
    service, run = open_experiment('learn', config_path, seed, out, quiet)
    with run:
        frame, paths = service.run_learn()
    if not quiet:
        click.echo(f"Logged {len(frame)} rows; saved {len(paths)} model(s) to {service.model_dir}")

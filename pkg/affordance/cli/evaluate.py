# affordance/cli/evaluate.py
"""
Compare saved models against the oracle.
"""
import click

from affordance.cli.common import experiment_options, open_experiment


@click.command('eval')
@experiment_options
@click.option('--models', 'models_dir', type=click.Path(exists=True, file_okay=False), default=None,
              help='Directory of saved models (default: <out>/<output.models>).')
def evaluate(config_path, seed, out, quiet, models_dir):
    """Write predictions, oracle values and absolute errors per probe state."""
    service, run = open_experiment('eval', config_path, seed, out, quiet)
    with run:
        frame = service.run_eval(models_dir)
    if not quiet:
        summary = frame[frame['state'] == 'linf']
        for _, row in summary.iterrows():
            click.echo(f"{row['demon']}: L-inf error {row['abs_error']:.6g}")

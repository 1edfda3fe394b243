# affordance/cli/common.py
"""
Options and plumbing shared by every subcommand.
"""
import click

from affordance.exceptions import ConfigurationError
from affordance.services.experiment import ExperimentService, load_experiment
from affordance.utils.logging import RunLogger, create_app_logger


def experiment_options(f):
    """--config, --seed, --out and --quiet"""
    f = click.option('--quiet', is_flag=True, help='Only warnings and errors; no progress bar.')(f)
    f = click.option('--out', type=click.Path(file_okay=False), default=None,
                     help='Output directory (overrides output.dir).')(f)
    f = click.option('--seed', type=int, default=None, help='Master seed (overrides run.seed).')(f)
    f = click.option('--config', 'config_path', required=True,
                     type=click.Path(exists=True, dir_okay=False), help='Experiment JSON file.')(f)
    return f


def open_experiment(command, config_path, seed, out, quiet):
    """
    Validate the config and set up logging for one subcommand.

    Returns:
        (service, run logger context)
    """
    app_logger = create_app_logger('affordance', quiet=quiet)
    try:
        config = load_experiment(config_path, seed=seed, out=out)
        service = ExperimentService(config, quiet=quiet)
    except ConfigurationError as e:
        app_logger.error(f"Configuration error: {e}", {'command': command, 'config': config_path})
        raise
    context = {'experiment': config.name, 'seed': config.run.seed, 'config': config_path}
    return service, RunLogger(app_logger, command, context)

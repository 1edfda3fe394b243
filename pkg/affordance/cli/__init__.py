# affordance/cli/__init__.py
"""
Command-line entry point: `affordance oracle|learn|eval|demo`.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
"""
import sys

import click
from pydantic import ValidationError

from affordance import __version__
from affordance.exceptions import AffordanceError, ConfigurationError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class AffordanceGroup(click.Group):
    """
    Group that maps package exceptions onto the documented exit codes.

    Failures are logged where they happen (open_experiment or RunLogger);
    here they are only echoed.
    """

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
            code = rv if isinstance(rv, int) else EXIT_OK
        except click.Abort:
            click.echo('Aborted!', err=True)
            code = EXIT_CONFIG
        except click.ClickException as e:
            e.show()
            code = EXIT_CONFIG
        except (ConfigurationError, ValidationError) as e:
            click.echo(f"Error: {e}", err=True)
            code = EXIT_CONFIG
        except AffordanceError as e:
            click.echo(f"Error: {type(e).__name__}: {e}", err=True)
            code = EXIT_RUNTIME
        except Exception as e:
            click.echo(f"Error: {type(e).__name__}: {e}", err=True)
            code = EXIT_RUNTIME
        if not standalone_mode:
            return code
        sys.exit(code)


@click.group(cls=AffordanceGroup)
@click.version_option(version=__version__, prog_name='affordance')
def cli():
    """General value functions over options: oracle, learning, evaluation and demos."""


from affordance.cli.oracle import oracle  # noqa: E402
from affordance.cli.learn import learn  # noqa: E402
from affordance.cli.evaluate import evaluate  # noqa: E402
from affordance.cli.demo import demo  # noqa: E402

cli.add_command(oracle)
cli.add_command(learn)
cli.add_command(evaluate)
cli.add_command(demo)


def main():
    cli()

import functools
import json
import logging
import sys

import click

from .config import config
from .errors import PipelineError, ValidationError

EXIT_VALIDATION = 2
EXIT_PIPELINE = 3


def setup_logging(level=None):
    logging.basicConfig(
        level=(level or config['LOG_LEVEL']).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def dump_json(document, path=None):
    """ Reports are written with sorted keys so equal runs give equal bytes.
    """
    text = json.dumps(document, sort_keys=True, indent=2)
    if path:
        with open(path, "w") as f:
            f.write(text + "\n")
    else:
        click.echo(text)


def exit_codes(func):
    """ Maps bad input to exit code 2 and failed runs to exit code 3.
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ValidationError as e:
            click.echo(f"invalid input: {e}", err=True)
            sys.exit(EXIT_VALIDATION)
        except PipelineError as e:
            click.echo(f"run failed: {e}", err=True)
            sys.exit(EXIT_PIPELINE)
    return wrapper

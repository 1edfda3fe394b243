# affordance/utils/validators.py
"""
Input validation utilities.
"""
import logging
import re

from pydantic import ValidationError

from affordance.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

_DEMON_NAME = re.compile(r'^[A-Za-z0-9_.\-]+$')


def validate_demon_name(name):
    """
    Demon names double as model file names, so they are restricted to
    letters, digits, '_', '-' and '.'.

    Raises:
        ConfigurationError: If the name is empty or holds other characters
    """
    if not name or not _DEMON_NAME.match(name) or name in ('.', '..'):
        raise ConfigurationError(f"Invalid demon name '{name}': use letters, digits, '_', '-' or '.'")
    return name


def format_validation_error(error: ValidationError) -> str:
    """One line per problem, each prefixed with its dotted config path"""
    lines = []
    for problem in error.errors():
        path = '.'.join(str(part) for part in problem['loc'])
        message = problem['msg']
        if message.startswith('Value error, '):
            message = message[len('Value error, '):]
        lines.append(f"{path}: {message}" if path else message)
    return '; '.join(lines)


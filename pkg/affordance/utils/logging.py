# affordance/utils/logging.py
"""
JSON-lines logging for the CLI: one record per line on stderr, plus rotating
files outside production.
"""
import json
import logging
import logging.handlers
import os
import sys
import time
import traceback
from datetime import datetime, timezone

from affordance.config import Config

# Attributes every LogRecord carries; anything else came in through extra=
_RECORD_FIELDS = set(vars(logging.LogRecord('', 0, '', 0, '', (), None))) | {'message', 'asctime', 'extra_data'}

LOG_FILE_MAX_BYTES = 10 * 1024 * 1024
LOG_FILE_BACKUPS = 5


class JsonFormatter(logging.Formatter):
    """Render a record as one JSON object; `extra` fields become top-level keys"""

    def format(self, record):
        log_record = {
            'timestamp': datetime.now(timezone.utc).isoformat(),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
            'module': record.module,
            'line': record.lineno,
        }
        fields = dict(getattr(record, 'extra_data', None) or {})
        fields.update({k: v for k, v in vars(record).items() if k not in _RECORD_FIELDS})
        log_record.update(fields)

        if record.exc_info and record.exc_info[0] is not None:
            exc_type, exc, tb = record.exc_info
            log_record['exception'] = {
                'type': exc_type.__name__,
                'message': str(exc),
                'traceback': traceback.format_exception(exc_type, exc, tb),
            }
        return json.dumps(log_record, default=str)


def _file_handler(log_dir, filename, level=logging.NOTSET):
    handler = logging.handlers.RotatingFileHandler(
        os.path.join(log_dir, filename),
        maxBytes=LOG_FILE_MAX_BYTES,
        backupCount=LOG_FILE_BACKUPS,
    )
    handler.setLevel(level)
    handler.setFormatter(JsonFormatter())
    return handler


class CustomLogger:
    """
    Package logger with structured `extra` data.

    Library modules log through `logging.getLogger(__name__)`; their records
    reach the handlers installed here because every module logger is a child
    of the `affordance` logger.

    Args:
        name: Root logger name
        level: Logger level (default Config.LOG_LEVEL)
        quiet: Console shows warnings and errors only
        log_dir: Where the rotating files go (default Config.LOG_DIR)
    """

    def __init__(self, name, level=None, quiet=False, log_dir=None):
        self.logger = logging.getLogger(name)
        self.logger.setLevel(level or Config.LOG_LEVEL)
        self.quiet = quiet
        self.log_dir = log_dir or Config.LOG_DIR
        self.setup_handlers()

    def setup_handlers(self):
        for handler in list(self.logger.handlers):
            self.logger.removeHandler(handler)
            handler.close()
        self.logger.propagate = False

        # stderr keeps stdout free for command output
        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(JsonFormatter())
        console.setLevel(logging.WARNING if self.quiet else logging.NOTSET)
        self.logger.addHandler(console)

        if Config.ENV != 'production':
            os.makedirs(self.log_dir, exist_ok=True)
            self.logger.addHandler(_file_handler(self.log_dir, 'affordance.log'))
            self.logger.addHandler(_file_handler(self.log_dir, 'errors.log', logging.ERROR))

    def log(self, level, message, extra=None, exc_info=None):
        self.logger.log(level, message, exc_info=exc_info, extra={'extra_data': extra} if extra else {})

    def info(self, message, extra=None):
        self.log(logging.INFO, message, extra)

    def warning(self, message, extra=None):
        self.log(logging.WARNING, message, extra)

    def error(self, message, extra=None, exc_info=None):
        if exc_info is True:
            exc_info = sys.exc_info()
        self.log(logging.ERROR, message, extra, exc_info)


class RunLogger:
    """
    Context manager that logs the lifecycle of one CLI subcommand.

    Args:
        logger: CustomLogger used for output
        command: Subcommand name (oracle, learn, eval, demo-<which>)
        context: Extra fields attached to both records (experiment name, seed)
    """

    def __init__(self, logger, command, context=None):
        self.logger = logger
        self.command = command
        self.context = dict(context or {})
        self.start_time = None

    def __enter__(self):
        self.start_time = time.perf_counter()
        self.logger.info(f"Run started: {self.command}", {'command': self.command, **self.context})
        return self

    def __exit__(self, exc_type, exc, tb):
        fields = {
            'command': self.command,
            'duration_ms': int((time.perf_counter() - self.start_time) * 1000),
            **self.context,
        }
        if exc_type is None:
            self.logger.info(f"Run completed: {self.command}", fields)
        else:
            fields['error'] = str(exc)
            self.logger.error(f"Run failed: {self.command}", fields, exc_info=(exc_type, exc, tb))
        return False


def create_app_logger(name='affordance', quiet=False):
    """Create the package logger used by the CLI"""
    return CustomLogger(name, quiet=quiet)

"""
Logging Setup for RecNet

Console logging in the "[time] LEVEL - message" format, or one JSON
object per record with --json-logs. Both go to stderr so that command
output on stdout stays machine-readable.
"""

import json
import logging
import sys
from datetime import datetime, timezone
from typing import Optional, TextIO

from src.utils.run_context import RunIdFilter

CONSOLE_FORMAT = '[%(asctime)s] %(levelname)s - %(message)s'
CONSOLE_DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

# Attributes callers may pass through `extra=`
EXTRA_FIELDS = ('stage', 'epoch', 'variant', 'duration_seconds')


class StructuredJSONFormatter(logging.Formatter):
    """JSON formatter with run ID support."""

    def format(self, record: logging.LogRecord) -> str:
        log_data = {
            'timestamp': datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat().replace('+00:00', 'Z'),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
            'run_id': getattr(record, 'run_id', '-'),
            'module': record.module,
            'function': record.funcName,
            'line': record.lineno,
        }

        for name in EXTRA_FIELDS:
            if hasattr(record, name):
                log_data[name] = getattr(record, name)

        if record.exc_info:
            log_data['exception'] = self.formatException(record.exc_info)

        return json.dumps(log_data)


def configure_logging(verbose: bool = False, json_logs: bool = False, stream: Optional[TextIO] = None) -> logging.Handler:
    """
    Install a single handler on the root logger.

    Args:
        verbose: DEBUG instead of INFO
        json_logs: Structured JSON records instead of console lines
        stream: Destination; stderr by default

    Returns:
        The installed handler
    """
    handler = logging.StreamHandler(stream if stream is not None else sys.stderr)
    if json_logs:
        handler.setFormatter(StructuredJSONFormatter())
    else:
        handler.setFormatter(logging.Formatter(CONSOLE_FORMAT, datefmt=CONSOLE_DATE_FORMAT))
    handler.addFilter(RunIdFilter())

    root = logging.getLogger()
    for existing in list(root.handlers):
        if getattr(existing, '_recnet_handler', False):
            root.removeHandler(existing)
    handler._recnet_handler = True
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    return handler

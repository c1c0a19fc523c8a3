"""
Run ID Utility for RecNet

Tags every log record emitted during a command, a training stage or a
sweep point with the identifier of the run it belongs to.
"""

import contextvars
import logging
import uuid
from typing import Optional

logger = logging.getLogger(__name__)

# Context variable for the run ID
_run_id: contextvars.ContextVar[Optional[str]] = contextvars.ContextVar(
    'run_id',
    default=None
)


def generate_run_id() -> str:
    """
    Generate a new run ID.

    Returns:
        The first 12 hex digits of a UUID4
    """
    run_id = uuid.uuid4().hex[:12]
    logger.debug(f"Generated run ID: {run_id}")
    return run_id


def get_run_id() -> Optional[str]:
    """Current run ID, or None outside any run."""
    return _run_id.get()


def set_run_id(run_id: str) -> None:
    """
    Set the run ID in the current context.

    Raises:
        ValueError: If run_id is empty or not a string
    """
    if not run_id or not isinstance(run_id, str):
        raise ValueError("Run ID must be a non-empty string")

    _run_id.set(run_id)


def clear_run_id() -> None:
    _run_id.set(None)


class RunContext:
    """
    Context manager scoping a run ID.

    Nested contexts restore the enclosing run ID on exit.
    """

    def __init__(self, run_id: Optional[str] = None):
        """
        Args:
            run_id: ID to use; generated when omitted
        """
        self.run_id = run_id
        self.previous_id: Optional[str] = None

    def __enter__(self) -> str:
        self.previous_id = get_run_id()

        if not self.run_id:
            self.run_id = generate_run_id()
        set_run_id(self.run_id)

        logger.debug(f"Entered run context: {self.run_id}")
        return self.run_id

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.previous_id:
            set_run_id(self.previous_id)
        else:
            clear_run_id()
        logger.debug(f"Left run context: {self.run_id}")


class RunIdFilter(logging.Filter):
    """Logging filter setting record.run_id ("-" outside any run)."""

    def filter(self, record: logging.LogRecord) -> bool:
        record.run_id = get_run_id() or "-"
        return True

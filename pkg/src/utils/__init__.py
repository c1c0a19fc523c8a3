"""
Utilities for RecNet

Run IDs on log records, console and JSON logging, and atomic file writes.
"""

from src.utils.atomic_io import atomic_write_bytes, atomic_write_json, atomic_write_text
from src.utils.logging_config import StructuredJSONFormatter, configure_logging
from src.utils.run_context import RunContext, RunIdFilter, clear_run_id, generate_run_id, get_run_id, set_run_id

__all__ = [
    "atomic_write_bytes",
    "atomic_write_json",
    "atomic_write_text",
    "StructuredJSONFormatter",
    "configure_logging",
    "RunContext",
    "RunIdFilter",
    "clear_run_id",
    "generate_run_id",
    "get_run_id",
    "set_run_id",
]

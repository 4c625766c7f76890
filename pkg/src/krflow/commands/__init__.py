"""
Command handlers for the krflow CLI.
"""
from .run import execute_run, handle_run
from .sweep import handle_sweep
from .verify import handle_verify

__all__ = [
    "execute_run",
    "handle_run",
    "handle_sweep",
    "handle_verify",
]

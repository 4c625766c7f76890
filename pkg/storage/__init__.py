"""
Storage package for the flow laboratory: checkpoints and run outputs.
"""
from .checkpoint_store import Checkpoint, CheckpointStore
from .outputs import (
    SERIES_COLUMNS,
    read_series,
    read_summary,
    write_series,
    write_summary,
    write_sweep,
)

__all__ = [
    "Checkpoint",
    "CheckpointStore",
    "SERIES_COLUMNS",
    "read_series",
    "read_summary",
    "write_series",
    "write_summary",
    "write_sweep",
]

"""
Binary checkpoint store for flow states.

Layout (little-endian): magic b"KRFL", u16 format version, u16 n, u32 N,
f64 t, then N^(2n) f64 potential values in row-major order.
"""
import logging
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from src.krflow.errors import CheckpointFormatError

logger = logging.getLogger(__name__)

MAGIC = b"KRFL"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHHId")
SUFFIX = ".krfl"


@dataclass(frozen=True, eq=False)
class Checkpoint:
    """Decoded checkpoint contents."""
    n: int
    N: int
    t: float
    values: np.ndarray
    path: Optional[Path] = None


def encode_checkpoint(n: int, N: int, t: float, values: np.ndarray) -> bytes:
    """Serialize a potential field."""
    values = np.asarray(values, dtype=np.float64)
    if values.size != N ** (2 * n):
        raise CheckpointFormatError(f"expected {N ** (2 * n)} values for n={n}, N={N}, got {values.size}")
    body = np.ascontiguousarray(values, dtype="<f8").tobytes(order="C")
    return HEADER.pack(MAGIC, FORMAT_VERSION, n, N, float(t)) + body


def decode_checkpoint(data: bytes, path: Optional[Path] = None) -> Checkpoint:
    """
    Parse checkpoint bytes.

    Raises:
        CheckpointFormatError: on bad magic, unknown version or wrong length
    """
    if len(data) < HEADER.size:
        raise CheckpointFormatError(f"checkpoint {path or ''} is truncated ({len(data)} bytes)")
    magic, version, n, N, t = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointFormatError(f"checkpoint {path or ''} has bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"checkpoint {path or ''} has unsupported version {version}")
    if n not in (1, 2):
        raise CheckpointFormatError(f"checkpoint {path or ''} has invalid dimension n={n}")
    count = N ** (2 * n)
    expected = HEADER.size + 8 * count
    if len(data) != expected:
        raise CheckpointFormatError(f"checkpoint {path or ''} has {len(data)} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=HEADER.size).astype(np.float64)
    return Checkpoint(n=n, N=N, t=t, values=values.reshape((N,) * (2 * n)), path=path)


class CheckpointStore:
    """Directory of KRFL checkpoints."""

    def __init__(self, root: Union[str, Path]):
        """
        Initialize the store.

        Args:
            root: Directory holding the checkpoint files (created on first write)
        """
        self.root = Path(root)

    def path_for(self, index: int, t: float) -> Path:
        return self.root / f"checkpoint_{index:04d}_t{t:.6f}{SUFFIX}"

    def write(self, n: int, N: int, t: float, values: np.ndarray, index: int = 0) -> Path:
        """
        Write one checkpoint.

        Args:
            n, N: Grid parameters
            t: Time of the state
            values: Potential values, shape (N,) * 2n
            index: Sequence number used in the file name

        Returns:
            Path of the written file
        """
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            path = self.path_for(index, t)
            path.write_bytes(encode_checkpoint(n, N, t, values))
            logger.info(f"Checkpoint written: {path}")
            return path
        except Exception as e:
            logger.error(f"Error writing checkpoint at t={t}: {str(e)}")
            raise

    def read(self, path: Union[str, Path]) -> Checkpoint:
        """Read and validate one checkpoint file."""
        path = Path(path)
        return decode_checkpoint(path.read_bytes(), path)

    def list(self) -> List[Path]:
        """Checkpoint files in the store, ordered by sequence number."""
        if not self.root.is_dir():
            return []

        def order(p: Path) -> int:
            match = re.match(r"checkpoint_(\d+)_", p.name)
            return int(match.group(1)) if match else -1

        return sorted(self.root.glob(f"*{SUFFIX}"), key=order)

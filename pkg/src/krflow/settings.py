"""
Process-wide settings read from the environment.
"""
import os
import logging
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)


class Settings(BaseModel):
    """Environment-derived settings."""
    output_root: Path = Field(default=Path("runs"), description="Root directory for run outputs")
    log_level: str = Field(default="INFO", pattern="^(DEBUG|INFO|WARNING|ERROR)$")
    fft_workers: int = Field(default=1, ge=-1, description="Worker threads for FFTs (-1: all cores)")


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """
    Get or create the global settings instance.

    Returns:
        Settings built from KRFLOW_OUTPUT_ROOT, KRFLOW_LOG_LEVEL and KRFLOW_FFT_WORKERS
    """
    global _settings
    if _settings is None:
        _settings = Settings(
            output_root=Path(os.getenv("KRFLOW_OUTPUT_ROOT", "runs")),
            log_level=os.getenv("KRFLOW_LOG_LEVEL", "INFO").upper(),
            fft_workers=int(os.getenv("KRFLOW_FFT_WORKERS", "1")),
        )
        logger.debug(f"Settings loaded: {_settings}")
    return _settings


def reset_settings() -> None:
    """Drop the cached settings so the next call re-reads the environment."""
    global _settings
    _settings = None

"""
Environment-driven settings.

Values are read once from the process environment (populated from `.env` by
`main.py`) and cached for the lifetime of the process.
"""

import os
import logging
from dataclasses import dataclass
from typing import Optional

logger = logging.getLogger(__name__)

KKT_SOLVERS = ("banded", "dense")


@dataclass(frozen=True)
class Settings:
    log_level: str = "INFO"
    sweep_workers: int = 4
    kkt_solver: str = "banded"


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Return cached settings, reading VT_* environment variables on first use."""
    global _settings
    if _settings is None:
        log_level = os.environ.get("VT_LOG_LEVEL", "INFO").upper()
        try:
            workers = max(1, int(os.environ.get("VT_SWEEP_WORKERS", "4")))
        except ValueError:
            logger.warning("VT_SWEEP_WORKERS is not an integer, using 4")
            workers = 4
        kkt_solver = os.environ.get("VT_KKT_SOLVER", "banded").lower()
        if kkt_solver not in KKT_SOLVERS:
            logger.warning(f"VT_KKT_SOLVER={kkt_solver!r} not in {KKT_SOLVERS}, using 'banded'")
            kkt_solver = "banded"
        _settings = Settings(log_level=log_level, sweep_workers=workers, kkt_solver=kkt_solver)
    return _settings


def reset_settings() -> None:
    """Drop the cache so the next call re-reads the environment."""
    global _settings
    _settings = None

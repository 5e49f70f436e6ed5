"""Process-wide runtime settings read from the environment."""

import logging
import os
from typing import Optional

from ..errors import ConfigError

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class Runtime:
    """Logging level, worker count and default seed."""

    def __init__(
        self,
        log_level: Optional[str] = None,
        workers: Optional[int] = None,
        seed: Optional[int] = None,
    ):
        """
        Initialize runtime settings.

        Args:
            log_level: Root log level (falls back to DML_LOG_LEVEL, then INFO)
            workers: Worker count for generation/evaluation (DML_WORKERS, default 4)
            seed: Seed used when a command gets no --seed (DML_SEED, default 0)
        """
        self.log_level = (log_level or os.getenv("DML_LOG_LEVEL") or "INFO").upper()
        if self.log_level not in LOG_LEVELS:
            raise ConfigError(f"DML_LOG_LEVEL must be one of {LOG_LEVELS}, got '{self.log_level}'")
        self.workers = workers if workers is not None else _env_int("DML_WORKERS", 4)
        if self.workers < 1:
            raise ConfigError("DML_WORKERS must be at least 1")
        self.seed = seed if seed is not None else _env_int("DML_SEED", 0)

    def to_dict(self) -> dict:
        return {"log_level": self.log_level, "workers": self.workers, "seed": self.seed}


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got '{raw}'")


# Global runtime instance
_runtime_instance: Optional[Runtime] = None


def configure_runtime(
    log_level: Optional[str] = None,
    workers: Optional[int] = None,
    seed: Optional[int] = None,
) -> Runtime:
    """Build the global runtime from explicit values and the environment."""
    global _runtime_instance
    _runtime_instance = Runtime(log_level, workers, seed)
    return _runtime_instance


def get_runtime() -> Runtime:
    """Get the global runtime, configuring it from the environment on first use."""
    global _runtime_instance
    if _runtime_instance is None:
        _runtime_instance = Runtime()
    return _runtime_instance


def reset_runtime() -> None:
    global _runtime_instance
    _runtime_instance = None

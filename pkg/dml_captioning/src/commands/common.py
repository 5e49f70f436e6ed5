"""Helpers shared by the command handlers."""

import asyncio
import logging
from pathlib import Path
from typing import Any, Awaitable, Callable, Dict, Iterable, List, Optional, TypeVar

from ..config.runtime import get_runtime
from ..errors import ConfigError, DataError, DMLError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def error_result(exc: Exception, **extra: Any) -> Dict[str, Any]:
    """Error payload in the handler contract; unexpected exceptions map to exit code 1."""
    exit_code = exc.exit_code if isinstance(exc, DMLError) else 1
    if not isinstance(exc, DMLError):
        logger.exception("unexpected failure")
    return {"status": "error", "error": str(exc), "exit_code": exit_code, **extra}


def resolve_split(data: str, split: str) -> Path:
    """A JSONL file is used as is; a directory resolves to `<dir>/<split>.jsonl`."""
    path = Path(data)
    if path.is_dir():
        path = path / f"{split}.jsonl"
    if not path.exists():
        raise DataError(f"dataset not found: {path}")
    return path


def parse_modes(text: Optional[str]) -> Optional[List[int]]:
    """`all` (or nothing) selects every effective mode; otherwise a comma list of indices."""
    if text is None or text == "all":
        return None
    try:
        modes = sorted({int(part) for part in text.split(",") if part.strip()})
    except ValueError:
        raise ConfigError(f"--modes must be 'all' or a comma-separated list of integers, got '{text}'")
    if not modes or modes[0] < 0:
        raise ConfigError(f"invalid mode list '{text}'")
    return modes


async def map_workers(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """Run `fn` over items on worker threads, at most `workers` at a time, keeping input order."""
    limit = asyncio.Semaphore(workers or get_runtime().workers)

    async def run(item: T) -> R:
        async with limit:
            return await asyncio.to_thread(fn, item)

    tasks: List[Awaitable[R]] = [run(item) for item in items]
    return list(await asyncio.gather(*tasks))

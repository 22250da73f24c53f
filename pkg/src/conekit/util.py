"""Small shared utilities: deterministic worker-pool mapping."""

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ConfigError

__all__ = ["worker_count", "parallel_map"]

WORKERS_ENV = "CONEKIT_WORKERS"


def worker_count():
    """Worker count from the environment, default 1 (serial)."""
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}")
    if count < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {count}")
    return count


def parallel_map(fn, items, workers=None):
    """Map fn over items, preserving order regardless of worker count.

    Threads suit the numpy-heavy probes here (they release the GIL);
    with one worker the map runs serially in the caller's thread.
    """
    items = list(items)
    if workers is None:
        workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))

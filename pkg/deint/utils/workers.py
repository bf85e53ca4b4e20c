"""Ordered parallel map over a thread pool capped by DINW_THREADS."""

import logging
import os
from multiprocessing.dummy import Pool as ThreadPool
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


def worker_count(threads: Optional[int] = None) -> int:
    """Explicit count, else DINW_THREADS, else the CPU count."""
    if threads is None:
        env = os.getenv("DINW_THREADS")
        try:
            threads = int(env) if env else (os.cpu_count() or 1)
        except ValueError:
            logger.warning(f"Invalid DINW_THREADS value {env!r}, using 1")
            threads = 1
    return max(1, threads)


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """Apply ``fn`` to every item; results keep input order regardless of the worker count."""
    items = list(items)
    threads = min(worker_count(threads), max(1, len(items)))
    if threads == 1:
        return [fn(item) for item in items]

    pool = ThreadPool(threads)
    try:
        return pool.map(fn, items)
    finally:
        pool.close()
        pool.join()

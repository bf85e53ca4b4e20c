"""
Machine snapshot and single-core pinning for timing runs.
"""

import logging
import os
import platform
from contextlib import contextmanager
from typing import Any, Dict, Iterator

import psutil

logger = logging.getLogger(__name__)


def system_snapshot() -> Dict[str, Any]:
    """CPU, memory and process figures recorded next to timing reports."""
    try:
        memory = psutil.virtual_memory()
        process = psutil.Process(os.getpid())
        freq = psutil.cpu_freq()
        return {
            "platform": platform.platform(),
            "processor": platform.processor() or platform.machine(),
            "physical_cores": psutil.cpu_count(logical=False),
            "logical_cores": psutil.cpu_count(logical=True),
            "cpu_mhz": round(freq.current, 1) if freq else None,
            "memory_total_gb": round(memory.total / 1024 ** 3, 2),
            "memory_percent": round(memory.percent, 2),
            "process_memory_mb": round(process.memory_info().rss / 1024 / 1024, 2),
        }
    except Exception as e:
        logger.warning(f"System snapshot failed: {e}")
        return {"platform": platform.platform()}


@contextmanager
def pinned_to_single_core() -> Iterator[bool]:
    """
    Restrict the process to one CPU while timing. Yields whether pinning took
    effect; platforms without affinity support run unpinned.
    """
    process = psutil.Process(os.getpid())
    if not hasattr(process, "cpu_affinity"):
        logger.info("CPU affinity unsupported on this platform, timing unpinned")
        yield False
        return

    original = process.cpu_affinity()
    try:
        process.cpu_affinity(original[:1])
        logger.info(f"Pinned timing run to CPU {original[0]}")
    except (psutil.Error, OSError) as e:
        logger.warning(f"Could not pin to a single core: {e}")
        yield False
        return

    try:
        yield True
    finally:
        process.cpu_affinity(original)

import logging
import os
from multiprocessing import Pool
from typing import Callable, Iterable, List, Optional

from config import settings


def configure_logging(level: Optional[str] = None):
    """
    Send package logs to stderr.

    The level comes from the argument, else the CONVEXITY_ATLAS_LOG_LEVEL
    environment variable, else WARNING.
    """
    level = level or os.environ.get(settings.LOG_LEVEL_ENV_VAR, 'WARNING')
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.WARNING),
                        format=settings.LOG_FORMAT)


def resolve_jobs(jobs: Optional[int] = None) -> int:
    """Worker count: CONVEXITY_ATLAS_JOBS when set, else the given value, else 1."""
    raw = os.environ.get(settings.JOBS_ENV_VAR, '')
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logging.getLogger(__name__).warning("ignoring %s=%r", settings.JOBS_ENV_VAR, raw)
    return max(1, int(jobs or 1))


def parallel_map(function: Callable, tasks: Iterable, jobs: int = 1) -> List:
    """
    Apply a picklable function to every task, keeping task order.

    With jobs == 1 the tasks run in-process.
    """
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [function(task) for task in tasks]
    with Pool(processes=min(jobs, len(tasks))) as pool:
        return pool.map(function, tasks)


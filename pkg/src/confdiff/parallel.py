"""Ordered task fan-out over a bounded process pool."""
import os
from concurrent.futures import ProcessPoolExecutor


def resolve_jobs(jobs=None):
    if jobs is None:
        jobs = int(os.environ.get("CONFDIFF_JOBS", "1") or 1)
    return max(1, int(jobs))


def run_tasks(fn, tasks, jobs=1):
    """``[fn(*t) for t in tasks]``, possibly in parallel; result order follows ``tasks``."""
    tasks = list(tasks)
    jobs = resolve_jobs(jobs)
    if jobs == 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, *zip(*tasks)))

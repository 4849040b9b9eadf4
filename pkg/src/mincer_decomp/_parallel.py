"""Ordered process-pool map shared by the profile fitter and the bootstrap."""
import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "MINCER_DECOMP_WORKERS"


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def ordered_map(func, items, workers=None):
    """``[func(x) for x in items]``, optionally spread over worker processes.

    Results are returned in input order, so the output never depends on the
    number of workers or on completion order.
    """
    items = list(items)
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    chunksize = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items, chunksize=chunksize))

"""Thread fan-out with deterministic, order-preserving results."""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "SPECDIM_THREADS"


def thread_count():
    raw = os.environ.get(ENV_THREADS, "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def pmap(fn, items):
    """Map ``fn`` over ``items``; output order always matches input order."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))

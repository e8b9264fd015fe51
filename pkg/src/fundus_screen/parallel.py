"""Order-preserving per-item parallelism capped by ``FUNDUS_SCREEN_THREADS``."""
import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "FUNDUS_SCREEN_THREADS"


def worker_count():
    raw = os.environ.get(ENV_THREADS, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"{ENV_THREADS} must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def map_ordered(fn, items):
    """``list(map(fn, items))``, spread over worker threads; results keep input order."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))

"""Order-preserving parallel map.

Results come back in input order whatever the worker count, and every
reduction downstream is exact, so output never depends on parallelism.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def pmap(fn: Callable[[T], R], items: Iterable[T], workers: int = 1, chunksize: int | None = None) -> list[R]:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    if chunksize is None:
        chunksize = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))

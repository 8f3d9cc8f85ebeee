"""Order-preserving worker pool used by the per-scan pipeline stages."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """Map fn over items, preserving input order in the result.

    With workers <= 1 this is a plain loop. Results are identical for any
    worker count because fn must not depend on shared mutable state (the
    pipeline's per-scan functions derive their own rng streams).
    """
    seq: Sequence[T] = list(items)
    if workers <= 1 or len(seq) <= 1:
        return [fn(item) for item in seq]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seq))

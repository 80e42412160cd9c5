"""Deterministic chunked worker pool.

Work is split into fixed-size chunks that do not depend on the worker count,
and every chunk writes only into its own output slots, so results are
byte-identical for any parallelism level. The first chunk runs on the
coordinator thread, which also serializes any pending JIT compilation before
the pool fans out.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

CHUNK_SIZE = 64


def run_chunked(
    total: int, work: Callable[[int, int], None], parallelism: int = 1
) -> None:
    """Invoke ``work(start, end)`` over [0, total) in fixed chunks."""
    if total <= 0:
        return
    if parallelism < 1:
        raise ValueError(f"parallelism must be >= 1, got {parallelism}")
    bounds = [
        (start, min(start + CHUNK_SIZE, total)) for start in range(0, total, CHUNK_SIZE)
    ]
    first = bounds[0]
    rest = bounds[1:]
    work(*first)
    if not rest:
        return
    if parallelism == 1:
        for start, end in rest:
            work(start, end)
        return
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(work, start, end) for start, end in rest]
        for fut in futures:
            fut.result()

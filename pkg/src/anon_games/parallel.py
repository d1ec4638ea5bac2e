"""Chunked, order-preserving execution of independent Monte Carlo trials."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

CHUNK = 500


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("ANON_GAMES_WORKERS", "1"))
    return max(1, int(workers))


def map_chunks(fn, static_args, budget: int, workers: int = 1, chunk: int = CHUNK) -> list:
    """Run ``fn((*static, start, stop))`` over fixed trial ranges covering ``range(budget)``.

    Chunk boundaries depend only on ``budget``, and results come back in
    chunk order, so the output does not depend on ``workers``.
    """
    static = tuple(static_args[0]) if static_args else ()
    jobs = [static + (s, min(s + chunk, budget)) for s in range(0, budget, chunk)]
    workers = resolve_workers(workers)
    if workers == 1 or len(jobs) == 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))

"""Order-preserving process-pool map with single-threaded BLAS per task."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence

from threadpoolctl import threadpool_limits


def _call_single_threaded(payload):
    func, item = payload
    with threadpool_limits(limits=1):
        try:
            return ("ok", func(item))
        except Exception as exc:  # recorded per point; the sweep carries on
            return ("error", f"{type(exc).__name__}: {exc}")


def parallel_map_safe(func: Callable, items: Sequence, workers: int = 1) -> list:
    """Evaluate ``func`` on every item; returns ``(status, value)`` pairs in input order.

    Each task runs with one BLAS thread regardless of ``workers`` so results
    are bit-identical for any worker count.
    """
    payloads = [(func, item) for item in items]
    if workers <= 1 or len(payloads) <= 1:
        return [_call_single_threaded(pl) for pl in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_call_single_threaded, payloads, chunksize=max(1, len(payloads) // (8 * workers))))


def parallel_map(func: Callable, items: Iterable, workers: int = 1) -> list:
    """Like :func:`parallel_map_safe` but re-raises the first failure."""
    out = []
    for status, value in parallel_map_safe(func, list(items), workers):
        if status == "error":
            raise RuntimeError(value)
        out.append(value)
    return out

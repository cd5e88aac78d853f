"""
Seed management and chunked execution over a fixed number of workers.

Results depend only on (seed, workers): chunk sizes and per-chunk generators
are derived from them, and chunks are concatenated in worker order.
"""

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")

RngLike = int | np.random.Generator | np.random.SeedSequence | None


def make_rng(rng: RngLike) -> np.random.Generator:
    """Normalize an int seed, SeedSequence or Generator to a Generator."""
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def spawn_generators(rng: RngLike, workers: int) -> list[np.random.Generator]:
    """One independent generator per worker."""
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if isinstance(rng, np.random.Generator):
        return list(rng.spawn(workers))
    seq = rng if isinstance(rng, np.random.SeedSequence) else np.random.SeedSequence(rng)
    return [np.random.default_rng(child) for child in seq.spawn(workers)]


def chunk_sizes(n_total: int, workers: int) -> list[int]:
    base, extra = divmod(n_total, workers)
    return [base + (1 if i < extra else 0) for i in range(workers)]


def run_chunked(
    fn: Callable[[np.random.Generator, int], Sequence[T]],
    n_total: int,
    rng: RngLike,
    workers: int = 1,
) -> list[T]:
    """Run fn(rng_i, n_i) for every worker chunk and concatenate in worker order."""
    generators = spawn_generators(rng, workers)
    sizes = chunk_sizes(n_total, workers)
    logger.debug("Running %d items over %d workers: %s", n_total, workers, sizes)
    if workers == 1:
        return list(fn(generators[0], sizes[0]))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(fn, generators, sizes))
    return [item for part in parts for item in part]


def mean_and_stderr(values) -> tuple[float, float]:
    """Sample mean and its standard error (zero for fewer than two values)."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return 0.0, 0.0
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / np.sqrt(arr.size))

"""Shared helpers: deterministic RNG derivation and optional process parallelism."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV_VAR = "FJORDTWIN_THREADS"


def rng_for(seed: int, *tags: int) -> np.random.Generator:
    """Independent generator for (seed, purpose tags), stable across runs."""
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(tags)))


def derive_seed(seed: int, *tags: int) -> int:
    """Deterministic child seed for handing to seed-taking APIs."""
    return int(np.random.SeedSequence((int(seed),) + tuple(tags)).generate_state(1)[0])


def max_workers() -> int:
    """Parallelism cap from the environment; 1 (sequential) when unset."""
    raw = os.environ.get(THREADS_ENV_VAR, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def parallel_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Order-preserving map, using worker processes when the env var allows.

    Results depend only on the items, never on scheduling, so callers may
    aggregate them positionally.
    """
    workers = max_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))

"""Deterministic chunked Monte Carlo driver.

Every stochastic estimate in the package goes through run_chunked: the
master seed spawns one counter-based generator per chunk, chunks may be
evaluated by a thread pool, and partial sums are reduced in chunk-index
order.  Results are therefore bit-identical across repeat runs and
across worker counts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

__all__ = ["MCEstimate", "MCSettings", "rng_for", "run_chunked"]


@dataclass(frozen=True)
class MCSettings:
    """Sample count, master seed and execution knobs for an estimate."""

    n_samples: int
    seed: int
    chunk_size: int = 16384
    threads: int = 1

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass(frozen=True)
class MCEstimate:
    """A stochastic value with its standard error and provenance.

    value and std_error have identical shapes (scalars, vectors or
    block arrays); complex values carry the errors of real and
    imaginary parts in the matching components of a complex number.
    """

    value: Any
    std_error: Any
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("an estimate needs at least 2 samples")
        err = np.asarray(self.std_error)
        if np.iscomplexobj(err):
            if np.any(err.real < 0) or np.any(err.imag < 0):
                raise ValueError("standard errors must be non-negative")
        elif np.any(err < 0):
            raise ValueError("standard errors must be non-negative")


def rng_for(seed: int, *path: int) -> np.random.Generator:
    """Counter-based generator for (seed, path); stable across runs."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(ss))


def run_chunked(chunk_fn: Callable[[np.random.Generator, int, dict], tuple],
                payload: dict, mc: MCSettings):
    """Accumulate (sum, sum_of_squares) tuples over seeded chunks.

    chunk_fn(rng, n, payload) must return array-likes (s, s2) for its n
    samples.  Reduction happens in chunk order regardless of the thread
    count, so the total is reproducible bit for bit.
    """
    sizes = []
    left = mc.n_samples
    while left > 0:
        take = min(left, mc.chunk_size)
        sizes.append(take)
        left -= take

    def job(idx_size):
        idx, size = idx_size
        return chunk_fn(rng_for(mc.seed, idx), size, payload)

    if mc.threads == 1 or len(sizes) == 1:
        results = [job(t) for t in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=mc.threads) as pool:
            results = list(pool.map(job, enumerate(sizes)))

    total = None
    total_sq = None
    for s, s2 in results:
        if total is None:
            total = np.array(s, dtype=np.result_type(s, float), copy=True)
            total_sq = np.array(s2, dtype=np.result_type(s2, float), copy=True)
        else:
            total += s
            total_sq += s2
    return total, total_sq, mc.n_samples

"""Case-level bootstrap with per-replicate derived seeds."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    """Independent generators derived from one seed, stable across replay order."""
    seeds = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.PCG64(s)) for s in seeds]


def bootstrap_ci(
    values: Sequence[float],
    stat: Callable[[Sequence[float]], float] | None = None,
    resamples: int = 1000,
    seed: int = 42,
) -> tuple[float, float]:
    """Two-sided 95% percentile interval over case resampling with replacement."""
    if len(values) == 0:
        raise ValueError("values must be non-empty")
    if stat is None:
        stat = lambda xs: float(np.mean(xs))
    arr = np.asarray(values, dtype=float)
    replicates = np.empty(resamples)
    for i, rng in enumerate(spawn_rngs(seed, resamples)):
        idx = rng.integers(0, len(arr), size=len(arr))
        replicates[i] = stat(arr[idx])
    low, high = np.percentile(replicates, [2.5, 97.5])
    return float(low), float(high)

"""Seeded replicate substreams.

Every replicate r draws from its own generator derived from (seed, r), so the
numbers it sees do not depend on how replicates are scheduled across threads.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

log = logging.getLogger(__name__)

T = TypeVar("T")


def substream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def run_replicates(fn: Callable[[int, np.random.Generator], T], count: int, seed: int,
                   workers: int = 1) -> list[T]:
    """Call fn(r, rng_r) for r in 0..count-1 and return the results in replicate order."""
    if count <= 0:
        return []

    def job(r: int) -> T:
        return fn(r, substream(seed, r))

    if workers <= 1:
        return [job(r) for r in range(count)]

    log.debug("running %d replicates on %d threads", count, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(count)))

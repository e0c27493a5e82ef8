"""Small shared helpers: seed derivation, ordered reductions, task mapping."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def _splitmix64(x: int) -> int:
    # Standard splitmix64 finalizer, used as a mixing function only.
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return (z ^ (z >> 31)) & 0xFFFFFFFFFFFFFFFF


def derive_seed(base: int, *indices: int) -> int:
    """Derive a child seed from a base seed and a path of indices.

    The derivation is a chained splitmix64 mix, so (base, r) and (base, r, k)
    give independent-looking streams and the mapping is documented and stable:
    child = mix(mix(base) ^ mix(index_0) ...), one mix per path element.
    """
    state = _splitmix64(int(base) & 0xFFFFFFFFFFFFFFFF)
    for ix in indices:
        state = _splitmix64(state ^ _splitmix64(int(ix) & 0xFFFFFFFFFFFFFFFF))
    return state


def pairwise_sum(values):
    """Sum a sequence in a fixed pairwise order, independent of chunking.

    Used for ensemble reductions so results are bit-stable for a given
    realization count no matter how the work was scheduled.
    """
    items = list(values)
    if not items:
        raise ValueError("pairwise_sum of empty sequence")
    while len(items) > 1:
        nxt = []
        for i in range(0, len(items) - 1, 2):
            nxt.append(items[i] + items[i + 1])
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def pairwise_mean(values):
    items = list(values)
    return pairwise_sum(items) / len(items)


def resolve_threads(threads: int | None = None) -> int:
    """Thread count: explicit argument, then STOCHOM_THREADS, then cpu count."""
    if threads is not None and threads > 0:
        return int(threads)
    env = os.environ.get("STOCHOM_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            n = 0
        if n > 0:
            return n
    return os.cpu_count() or 1


def ordered_map(fn, items, threads: int | None = 1):
    """Map fn over items, optionally on a thread pool, results in input order.

    ``threads=None`` resolves via STOCHOM_THREADS or the cpu count.
    Collection order is fixed by the input sequence, so downstream pairwise
    reductions see the same operand order regardless of scheduling.
    """
    items = list(items)
    threads = resolve_threads(threads)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def sample_stats(samples):
    """Entrywise mean and standard error over the leading axis.

    Mean uses the fixed pairwise order. stderr is the sample standard
    deviation over realizations divided by sqrt(R); zero when R == 1.
    """
    arr = np.asarray(samples)
    r = arr.shape[0]
    mean = pairwise_mean([arr[i] for i in range(r)])
    if r < 2:
        return mean, np.zeros(arr.shape[1:], dtype=float)
    dev = np.abs(arr - mean) ** 2
    var = pairwise_sum([dev[i] for i in range(r)]) / (r - 1)
    return mean, np.sqrt(var.real / r)

"""Prime and smallest-prime-factor sieves."""

from __future__ import annotations

import numpy as np
from numba import njit


def primes_upto(limit: int) -> np.ndarray:
    if limit < 2:
        return np.empty(0, dtype=np.int64)
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, int(limit ** 0.5) + 1):
        if is_prime[p]:
            is_prime[p * p :: p] = False
    return np.flatnonzero(is_prime).astype(np.int64)


@njit(cache=True)
def _spf(limit):
    spf = np.zeros(limit + 1, dtype=np.int32)
    for i in range(2, limit + 1):
        if spf[i] == 0:
            spf[i] = i
            if i * i <= limit:
                for j in range(i * i, limit + 1, i):
                    if spf[j] == 0:
                        spf[j] = i
    return spf


def smallest_prime_factor(limit: int) -> np.ndarray:
    """spf[n] for 0 <= n <= limit (spf[0] = spf[1] = 0)."""
    return _spf(max(int(limit), 1))


def squarefree_mask(limit: int) -> np.ndarray:
    """mask[n] is True iff n is squarefree, for 0 <= n <= limit."""
    mask = np.ones(limit + 1, dtype=bool)
    mask[0] = False
    for p in primes_upto(int(limit ** 0.5) + 1):
        mask[p * p :: p * p] = False
    return mask

"""Counter-based random numbers shared by the field and the engines.

Every random quantity is a pure function of a 64-bit key and a counter, so a
particle's free path, a site's occupation count and a thinning mark can be
regenerated in any order. Keys are derived as

    key = mix(mix(mix(seed ^ tag) ^ c_1) ^ c_2 ...)

where ``mix`` is the SplitMix64 finalizer and the ``c_i`` are the lattice
coordinates (two's complement) followed by the particle index. The n-th draw
of a stream is ``mix(key + (n + 1) * GOLDEN)``, i.e. the n-th output of a
SplitMix64 generator seeded with ``key``.
"""

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0

# stream tags
TAG_SITE = np.uint64(0x5173C0DE0001)
TAG_PATH = np.uint64(0x5173C0DE0002)
TAG_THIN = np.uint64(0x5173C0DE0003)
TAG_REPLICA = np.uint64(0x5173C0DE0004)


@njit(cache=True)
def mix64(x):
    x = np.uint64(x)
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


@njit(cache=True)
def as_u64(v):
    """Two's complement view of a signed integer."""
    return np.uint64(np.int64(v))


@njit(cache=True)
def derive_key(seed, tag, coords, index):
    """Key for (seed, tag, lattice coordinates, index)."""
    h = mix64(np.uint64(seed) ^ tag)
    for c in coords:
        h = mix64(h ^ (as_u64(c) + GOLDEN))
    return mix64(h ^ (as_u64(index) + GOLDEN))


@njit(cache=True)
def draw(key, n):
    """The n-th 64-bit draw of the stream with the given key."""
    return mix64(np.uint64(key) + (np.uint64(n) + np.uint64(1)) * GOLDEN)


@njit(cache=True)
def to_unit(h):
    """Uniform in [0, 1) from the top 53 bits."""
    return np.float64(h >> np.uint64(11)) * _INV53


@njit(cache=True)
def poisson_inverse(u, mean):
    """Poisson(mean) by inversion of the cdf at u in [0, 1)."""
    if mean <= 0.0:
        return 0
    p = np.exp(-mean)
    cdf = p
    k = 0
    while u >= cdf and k < 100000:
        k += 1
        p *= mean / k
        cdf += p
        if p == 0.0 and cdf < u:
            # only reachable if u sits inside rounding slack of 1
            break
    return k


def replica_seed(master_seed: int, k_index: int, replica: int) -> int:
    """Per-replica seed as a pure function of the experiment coordinates."""
    coords = np.array([k_index], dtype=np.int64)
    return int(derive_key(np.uint64(master_seed % 2**64), TAG_REPLICA, coords, replica))

"""Free particle paths drawn from per-particle counter streams.

Draw 2k of a particle's stream sets the k-th holding time and draw 2k + 1 its
direction, so a path is a pure function of the particle key and can be
replayed from time 0 at any point.
"""

import numpy as np
from numba import njit

from .rng import draw, to_unit


@njit(cache=True)
def holding(key, k, rate):
    return -np.log(1.0 - to_unit(draw(key, 2 * k))) / rate


@njit(cache=True)
def step_1d(key, k):
    return 1 if (draw(key, 2 * k + 1) >> np.uint64(63)) == np.uint64(1) else -1


@njit(cache=True)
def direction(key, k, n_dir):
    """Index in [0, n_dir) of the k-th move; n_dir = 2d."""
    return int(to_unit(draw(key, 2 * k + 1)) * n_dir)


@njit(cache=True)
def tail_rate(h, t):
    """Exponent of the Doob bound P[M_t >= h] <= exp(-tail_rate(h, t))."""
    if h <= 0.0:
        return 0.0
    if t <= 0.0:
        return np.inf
    return h * np.arcsinh(h / t) - np.sqrt(h * h + t * t) + t


@njit(cache=True)
def reach(t, log_inv_eps):
    """Smallest integer h >= 0 with P[M_t >= h] <= eps by the Doob bound."""
    if t <= 0.0:
        return 1
    lo = 0
    hi = 1
    while tail_rate(hi, t) < log_inv_eps:
        lo = hi
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail_rate(mid, t) < log_inv_eps:
            lo = mid
        else:
            hi = mid
    return hi


@njit(cache=True)
def reach_time(h, log_inv_eps):
    """First time at which reach(t) exceeds h, i.e. tail_rate(h, t) drops below log(1/eps)."""
    if h <= 0:
        return 0.0
    lo = 0.0
    hi = 1.0
    while tail_rate(h, hi) >= log_inv_eps:
        lo = hi
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if tail_rate(h, mid) >= log_inv_eps:
            lo = mid
        else:
            hi = mid
    return hi

"""Event-driven kernel for one-dimensional MDLA on the positive half-line."""

import numpy as np
from numba import njit

from ._paths import holding, reach, reach_time, step_1d
from .field import count_at, path_key, thinning_mark

OK = 0
WINDOW_EXCEEDED = 1
PARTICLES_EXCEEDED = 2


@njit(cache=True)
def _heap_push(ht, hp, n, t, p):
    i = n
    ht[i] = t
    hp[i] = p
    while i > 0:
        parent = (i - 1) >> 1
        if ht[parent] <= ht[i]:
            break
        ht[parent], ht[i] = ht[i], ht[parent]
        hp[parent], hp[i] = hp[i], hp[parent]
        i = parent
    return n + 1


@njit(cache=True)
def _heap_pop(ht, hp, n):
    n -= 1
    ht[0] = ht[n]
    hp[0] = hp[n]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= n:
            break
        c = left
        if left + 1 < n and ht[left + 1] < ht[left]:
            c = left + 1
        if ht[i] <= ht[c]:
            break
        ht[c], ht[i] = ht[i], ht[c]
        hp[c], hp[i] = hp[i], hp[c]
        i = c
    return n


@njit(cache=True)
def _front_before(jt, nj, u):
    """X_{u-}: in 1D the front is the number of jumps strictly before u."""
    return np.searchsorted(jt[:nj], u, side="left")


@njit(cache=True)
def simulate_kernel(seed, k_field, keep, horizon, adhesion, window, log_inv_eps, max_particles):
    """Run one replica.

    Sites 1..window are available; site p is materialized once
    p - X_t - 1 < reach(t), after replaying its particles' free paths from
    time 0 and checking them against the recorded front. Particles are
    frozen lazily: one sitting on a site the front has swept is frozen at
    the sweep time when its next event is popped.
    """
    cap = max_particles
    p_site = np.empty(cap, dtype=np.int64)
    p_idx = np.empty(cap, dtype=np.int64)
    p_key = np.empty(cap, dtype=np.uint64)
    p_pos = np.empty(cap, dtype=np.int64)
    p_k = np.empty(cap, dtype=np.int64)
    p_tmat = np.empty(cap)
    p_tfreeze = np.empty(cap)
    ht = np.empty(cap)
    hp = np.empty(cap, dtype=np.int64)
    jt = np.empty(window + 2)
    coords = np.empty(1, dtype=np.int64)

    n_p = 0
    n_heap = 0
    nj = 0
    x = 0
    events = 0
    leaks = 0
    status = OK
    next_site = 1
    now = 0.0
    t_trig = 0.0
    stale = True

    while True:
        # next materialization trigger; depends only on x and next_site
        if stale:
            if k_field > 0.0 and next_site <= window:
                t_trig = max(now, reach_time(next_site - x - 1, log_inv_eps))
            else:
                t_trig = np.inf
            stale = False
        t_ev = ht[0] if n_heap > 0 else np.inf
        if min(t_trig, t_ev) > horizon:
            break
        if t_trig <= t_ev:
            now = t_trig
            # materialize every site now within reach
            r = reach(now, log_inv_eps)
            while next_site <= window and next_site - x - 1 < r:
                coords[0] = next_site
                c = count_at(seed, coords, k_field)
                for i in range(c):
                    if keep < 1.0 and thinning_mark(seed, coords, i) >= keep:
                        continue
                    if n_p >= cap:
                        return status | PARTICLES_EXCEEDED, n_p, nj, events, leaks, next_site, x, p_site, p_idx, p_key, p_pos, p_k, p_tmat, p_tfreeze, jt
                    key = path_key(seed, coords, i)
                    z = next_site
                    tau = 0.0
                    k = 0
                    leaked = False
                    while True:
                        tn = tau + holding(key, k, 1.0)
                        if tn > now:
                            break
                        dz = step_1d(key, k)
                        if adhesion and z <= x + 1:
                            xm = _front_before(jt, nj, tn)
                            if z <= xm or (dz < 0 and z == xm + 1):
                                leaked = True
                        z += dz
                        tau = tn
                        k += 1
                    if adhesion and z <= x:
                        leaked = True
                    p_site[n_p] = next_site
                    p_idx[n_p] = i
                    p_key[n_p] = key
                    p_pos[n_p] = z
                    p_k[n_p] = k
                    p_tmat[n_p] = now
                    p_tfreeze[n_p] = np.inf
                    if leaked:
                        leaks += 1
                        p_tfreeze[n_p] = -1.0
                    else:
                        n_heap = _heap_push(ht, hp, n_heap, tn, n_p)
                    n_p += 1
                next_site += 1
            stale = True
            if next_site > window and next_site - x - 1 < r:
                status |= WINDOW_EXCEEDED
                break
            continue

        now = t_ev
        p = hp[0]
        n_heap = _heap_pop(ht, hp, n_heap)
        z = p_pos[p]
        if adhesion and z <= x:
            # swept by the front while sitting here
            p_tfreeze[p] = jt[z - 1]
            continue
        events += 1
        k = p_k[p]
        dz = step_1d(p_key[p], k)
        if adhesion and dz < 0 and z == x + 1:
            jt[nj] = now
            nj += 1
            x = z
            stale = True
            p_tfreeze[p] = now
            p_k[p] = k + 1
            continue
        p_pos[p] = z + dz
        p_k[p] = k + 1
        n_heap = _heap_push(ht, hp, n_heap, now + holding(p_key[p], k + 1, 1.0), p)

    # settle particles swept after their last event
    for h in range(n_heap):
        p = hp[h]
        if adhesion and p_pos[p] <= x and p_tfreeze[p] == np.inf:
            p_tfreeze[p] = jt[p_pos[p] - 1]
    return status, n_p, nj, events, leaks, next_site, x, p_site, p_idx, p_key, p_pos, p_k, p_tmat, p_tfreeze, jt

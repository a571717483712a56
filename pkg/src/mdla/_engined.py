"""Event-driven kernel for MDLA on Z^d, d >= 2.

The lattice is held as a dense grid of join times (inf off the aggregate)
over a fixed box. Particles are materialized in shells: every site within
l-infinity distance reach(t) of the aggregate's bounding box is
materialized, after its particles' free paths are replayed from time 0 and
checked against the join times.
"""

import numpy as np
from numba import njit

from ._engine1d import _heap_pop, _heap_push
from ._paths import direction, holding, reach, reach_time
from .field import count_at, path_key, thinning_mark

OK = 0
WINDOW_EXCEEDED = 1
PARTICLES_EXCEEDED = 2


@njit(cache=True)
def _flat(c, glo, stride, gshape):
    """Flat grid index of c, or -1 off the grid."""
    f = 0
    for i in range(len(c)):
        r = c[i] - glo[i]
        if r < 0 or r >= gshape[i]:
            return -1
        f += r * stride[i]
    return f


@njit(cache=True)
def _join_time(agg, c, glo, stride, gshape):
    f = _flat(c, glo, stride, gshape)
    return np.inf if f < 0 else agg[f]


@njit(cache=True)
def _near(c, alo, ahi):
    for i in range(len(c)):
        if c[i] < alo[i] - 1 or c[i] > ahi[i] + 1:
            return False
    return True


@njit(cache=True)
def _materialize_site(
    site, now, seed, d, k_field, keep, adhesion, agg, glo, stride, gshape, alo, ahi,
    p_site, p_idx, p_key, p_pos, p_k, p_tmat, p_tfreeze, ht, hp, counters,
):
    """Add the particles of one site; counters = [n_p, n_heap, leaks, status]."""
    # the origin starts inside the aggregate and carries no particles
    at_origin = True
    for i in range(d):
        if site[i] != 0:
            at_origin = False
    if at_origin:
        return
    c = count_at(seed, site, k_field)
    z = np.empty(d, dtype=np.int64)
    for j in range(c):
        if keep < 1.0 and thinning_mark(seed, site, j) >= keep:
            continue
        n_p = counters[0]
        if n_p >= len(p_idx):
            counters[3] |= PARTICLES_EXCEEDED
            return
        key = path_key(seed, site, j)
        z[:] = site
        tau = 0.0
        k = 0
        leaked = False
        while True:
            tn = tau + holding(key, k, float(d))
            if tn > now:
                break
            dirn = direction(key, k, 2 * d)
            ax = dirn // 2
            sg = 1 if dirn % 2 == 0 else -1
            if adhesion and _near(z, alo, ahi):
                if _join_time(agg, z, glo, stride, gshape) <= tn:
                    leaked = True
                z[ax] += sg
                if _join_time(agg, z, glo, stride, gshape) < tn:
                    leaked = True
                z[ax] -= sg
            z[ax] += sg
            tau = tn
            k += 1
        if adhesion and _join_time(agg, z, glo, stride, gshape) <= now:
            leaked = True
        p_site[n_p, :] = site
        p_idx[n_p] = j
        p_key[n_p] = key
        p_pos[n_p, :] = z
        p_k[n_p] = k
        p_tmat[n_p] = now
        p_tfreeze[n_p] = np.inf
        if leaked:
            counters[2] += 1
            p_tfreeze[n_p] = -1.0
        else:
            counters[1] = _heap_push(ht, hp, counters[1], tn, n_p)
        counters[0] = n_p + 1


@njit(cache=True)
def simulate_d_kernel(seed, d, k_field, keep, horizon, adhesion, log_inv_eps, half_width, max_particles):
    n_dir = 2 * d
    gshape = np.full(d, 2 * half_width + 1, dtype=np.int64)
    glo = np.full(d, -half_width, dtype=np.int64)
    stride = np.ones(d, dtype=np.int64)
    for i in range(d - 2, -1, -1):
        stride[i] = stride[i + 1] * gshape[i + 1]
    n_sites = stride[0] * gshape[0]
    agg = np.full(n_sites, np.inf)
    origin = np.zeros(d, dtype=np.int64)
    agg[_flat(origin, glo, stride, gshape)] = 0.0

    cap = max_particles
    p_site = np.empty((cap, d), dtype=np.int64)
    p_idx = np.empty(cap, dtype=np.int64)
    p_key = np.empty(cap, dtype=np.uint64)
    p_pos = np.empty((cap, d), dtype=np.int64)
    p_k = np.empty(cap, dtype=np.int64)
    p_tmat = np.empty(cap)
    p_tfreeze = np.empty(cap)
    ht = np.empty(cap)
    hp = np.empty(cap, dtype=np.int64)
    counters = np.zeros(4, dtype=np.int64)  # n_p, n_heap, leaks, status

    alo = np.zeros(d, dtype=np.int64)
    ahi = np.zeros(d, dtype=np.int64)
    mlo = np.zeros(d, dtype=np.int64)
    mhi = np.full(d, -1, dtype=np.int64)  # empty materialized box
    tlo = np.empty(d, dtype=np.int64)
    thi = np.empty(d, dtype=np.int64)
    site = np.empty(d, dtype=np.int64)
    target = np.empty(d, dtype=np.int64)

    x_times = [0.0]
    x_times.pop()
    u_sites = [origin.copy()]
    u_times = [0.0]
    d_times = [0.0]
    d_diam = [0]
    d_x = [0]
    x = 0
    diam = 0
    events = 0
    now = 0.0
    need_mat = True
    r_next = 0.0

    while True:
        t_trig = now if need_mat else r_next
        t_ev = ht[0] if counters[1] > 0 else np.inf
        if min(t_trig, t_ev) > horizon:
            break
        if t_trig <= t_ev:
            now = t_trig
            r = reach(now, log_inv_eps)
            r_next = reach_time(r, log_inv_eps)
            need_mat = False
            if k_field <= 0.0:
                r_next = np.inf
                continue
            fits = True
            for i in range(d):
                tlo[i] = alo[i] - r
                thi[i] = ahi[i] + r
                if tlo[i] < glo[i] or thi[i] >= glo[i] + gshape[i]:
                    fits = False
            if not fits:
                counters[3] |= WINDOW_EXCEEDED
                break
            empty = mhi[0] < mlo[0]
            # new shell = target box minus materialized box, as disjoint slabs
            for i in range(d):
                for side in range(2):
                    if empty:
                        if side == 1 or i > 0:
                            continue
                        a, b = tlo[0], thi[0]
                    elif side == 0:
                        a, b = tlo[i], mlo[i] - 1
                    else:
                        a, b = mhi[i] + 1, thi[i]
                    if a > b:
                        continue
                    lo = np.empty(d, dtype=np.int64)
                    hi = np.empty(d, dtype=np.int64)
                    for j in range(d):
                        if j == i:
                            lo[j], hi[j] = a, b
                        elif j < i and not empty:
                            lo[j], hi[j] = mlo[j], mhi[j]
                        else:
                            lo[j], hi[j] = tlo[j], thi[j]
                    site[:] = lo
                    while True:
                        _materialize_site(
                            site, now, seed, d, k_field, keep, adhesion, agg, glo, stride, gshape, alo, ahi,
                            p_site, p_idx, p_key, p_pos, p_k, p_tmat, p_tfreeze, ht, hp, counters,
                        )
                        if counters[3] != OK:
                            break
                        q = d - 1
                        while q >= 0:
                            site[q] += 1
                            if site[q] <= hi[q]:
                                break
                            site[q] = lo[q]
                            q -= 1
                        if q < 0:
                            break
                    if counters[3] != OK:
                        break
                if counters[3] != OK:
                    break
            if counters[3] != OK:
                break
            mlo[:] = tlo
            mhi[:] = thi
            continue

        now = t_ev
        p = hp[0]
        counters[1] = _heap_pop(ht, hp, counters[1])
        if adhesion:
            tj = _join_time(agg, p_pos[p], glo, stride, gshape)
            if tj <= now:
                p_tfreeze[p] = tj
                continue
        events += 1
        k = p_k[p]
        dirn = direction(p_key[p], k, n_dir)
        ax = dirn // 2
        sg = 1 if dirn % 2 == 0 else -1
        target[:] = p_pos[p]
        target[ax] += sg
        if adhesion and _join_time(agg, target, glo, stride, gshape) < np.inf:
            f = _flat(p_pos[p], glo, stride, gshape)
            agg[f] = now
            p_tfreeze[p] = now
            p_k[p] = k + 1
            grew = False
            for i in range(d):
                if p_pos[p, i] < alo[i]:
                    alo[i] = p_pos[p, i]
                    grew = True
                if p_pos[p, i] > ahi[i]:
                    ahi[i] = p_pos[p, i]
                    grew = True
            if grew:
                need_mat = True
                nd = 0
                for i in range(d):
                    nd = max(nd, ahi[i] - alo[i])
                new_x = ahi[0]
                if new_x > x:
                    x = new_x
                    x_times.append(now)
                    u_sites.append(p_pos[p].copy())
                    u_times.append(now)
                if nd != diam or new_x != d_x[-1]:
                    diam = nd
                    d_times.append(now)
                    d_diam.append(nd)
                    d_x.append(x)
            continue
        p_pos[p, ax] += sg
        p_k[p] = k + 1
        counters[1] = _heap_push(ht, hp, counters[1], now + holding(p_key[p], k + 1, float(d)), p)

    n_p = counters[0]
    for h in range(counters[1]):
        p = hp[h]
        if adhesion and p_tfreeze[p] == np.inf:
            tj = _join_time(agg, p_pos[p], glo, stride, gshape)
            if tj < np.inf:
                p_tfreeze[p] = tj
    u_arr = np.empty((len(u_sites), d), dtype=np.int64)
    for i in range(len(u_sites)):
        u_arr[i, :] = u_sites[i]
    frozen = np.nonzero(agg < np.inf)[0]
    agg_sites = np.empty((len(frozen), d), dtype=np.int64)
    agg_times = np.empty(len(frozen))
    for m in range(len(frozen)):
        f = frozen[m]
        agg_times[m] = agg[f]
        for i in range(d):
            agg_sites[m, i] = glo[i] + (f // stride[i]) % gshape[i]
    return (
        counters[3], n_p, events, counters[2], mlo, mhi, alo, ahi,
        np.array(x_times), u_arr, np.array(u_times),
        np.array(d_times), np.array(d_diam), np.array(d_x),
        agg_sites, agg_times,
        p_site[:n_p].copy(), p_idx[:n_p].copy(), p_key[:n_p].copy(), p_tmat[:n_p].copy(), p_tfreeze[:n_p].copy(), p_pos[:n_p].copy(),
    )

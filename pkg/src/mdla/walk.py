"""Rate-1 continuous-time simple random walk on Z: exact laws and Monte Carlo.

W_t jumps +1 and -1 at rate 1/2 each, so W_t is the difference of two
independent Poisson(t/2) counts and P[W_t = k] = e^{-t} I_|k|(t). M_t is the
running maximum; by reflection P[M_t >= j] = P[W_t >= j] + P[W_t >= j + 1].
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numba import njit
from scipy import optimize, special, stats


class HorizonError(ValueError):
    """The simulation horizon does not justify truncating the event."""


@dataclass(frozen=True)
class WalkLaw:
    """A law on the integers support_lo..support_hi."""

    t: float
    support_lo: int
    support_hi: int
    mass: np.ndarray
    truncation_error: float

    def pmf(self, k: int) -> float:
        if k < self.support_lo or k > self.support_hi:
            return 0.0
        return float(self.mass[k - self.support_lo])

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.support_lo, self.support_hi + 1)

    def mean(self) -> float:
        return float(np.dot(self.support, self.mass))

    def var(self) -> float:
        m = self.mean()
        return float(np.dot((self.support - m) ** 2, self.mass))


@dataclass(frozen=True)
class SurvivalEstimate:
    point_estimate: float
    standard_error: float
    n_samples: int

    @classmethod
    def from_counts(cls, survived: int, n: int, scale: float = 1.0) -> "SurvivalEstimate":
        p = survived / n
        return cls(scale * p, scale * float(np.sqrt(p * (1.0 - p) / n)), n)


def _check_t(t, positive=False):
    if not np.isfinite(t) or t < 0 or (positive and t <= 0):
        raise ValueError(f"invalid time {t}")


def _check_tol(tol):
    if not (0.0 < tol < 1.0):
        raise ValueError(f"tol must lie in (0, 1), got {tol}")


def doob_tail(h, t):
    """Upper bound exp(-sup_theta[theta h - (cosh theta - 1) t]) on P[M_t >= h].

    Doob's inequality for the exponential martingale of W. It is at most
    e^{1 - h / sqrt(t)} for t >= 1 (take theta = t^{-1/2}).
    """
    h = np.asarray(h, dtype=float)
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        rate = h * np.arcsinh(h / t) - np.sqrt(h * h + t * t) + t
    rate = np.where(t > 0, rate, np.where(h > 0, np.inf, 0.0))
    rate = np.where(np.isposinf(h), np.inf, rate)
    return np.where(h <= 0, 1.0, np.exp(-rate))


@lru_cache(maxsize=256)
def _marginal(t: float):
    """e^{-t} I_k(t) for k = 0..k_max, plus a bound on the mass beyond k_max."""
    k_max = int(np.ceil(60.0 + 40.0 * np.sqrt(t)))
    k = np.arange(k_max + 2)
    m = special.ive(k, t)
    beyond = float(doob_tail(k_max + 1, t))
    m.setflags(write=False)
    return m, beyond


def _upper_tails(m):
    """tails[k] = sum_{i >= k} m[i], summed from the small end."""
    return np.cumsum(m[::-1])[::-1]


def walk_pmf(t: float, tol: float = 1e-12) -> WalkLaw:
    """Law of W_t on a symmetric support with omitted mass at most tol."""
    _check_t(t)
    _check_tol(tol)
    if t == 0:
        return WalkLaw(0.0, 0, 0, np.ones(1), 0.0)
    m, beyond = _marginal(float(t))
    tails = _upper_tails(m) + beyond
    # omitted mass beyond +-k is 2 * tails[k + 1]
    ok = np.nonzero(2.0 * tails[1:] <= tol)[0]
    k = int(ok[0]) if ok.size else len(m) - 2
    half = m[: k + 1]
    mass = np.concatenate([half[:0:-1], half])
    return WalkLaw(float(t), -k, k, mass, float(2.0 * tails[k + 1]))


def _tail_geq(law: WalkLaw, j: int) -> float:
    if j > law.support_hi:
        return 0.0
    lo = max(j, law.support_lo) - law.support_lo
    return float(np.sum(law.mass[lo:][::-1]))


def max_tail(t: float, j: int, tol: float = 1e-15) -> float:
    """P[M_t >= j] from the marginal law via reflection."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    _check_t(t)
    if j == 0:
        return 1.0
    law = walk_pmf(t, tol)
    return _tail_geq(law, j) + _tail_geq(law, j + 1)


def max_zero_prob(t: float, tol: float = 1e-15) -> float:
    """P[M_t = 0] = P[W_t = 0] + P[W_t = 1]."""
    _check_t(t, positive=True)
    law = walk_pmf(t, tol)
    return law.pmf(0) + law.pmf(1)


def conditioned_endpoint(t: float, tol: float = 1e-15) -> WalkLaw:
    """Law of W_t given M_t = 0: mass(a) proportional to p(a) - p(a - 2), a <= 0."""
    _check_t(t, positive=True)
    law = walk_pmf(t, tol)
    k = law.support_hi
    p = special.ive(np.arange(k + 3), t)
    a = np.arange(-k, 1)
    raw = p[-a] - p[2 - a]
    z = p[0] + p[1]
    # mass below -k telescopes to p(k+1) + p(k+2)
    omitted = float((p[k + 1] + p[k + 2]) / z)
    return WalkLaw(float(t), -k, 0, raw / z, omitted)


def theta_root(alpha: float) -> float:
    """Positive root of cosh(theta) - 1 - alpha * theta, by bisection on (0, 3]."""
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")

    def f(x):
        return np.cosh(x) - 1.0 - alpha * x

    # f < 0 on (0, theta) and f(alpha) < 0 for alpha <= 1
    return float(optimize.bisect(f, alpha, 3.0, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=2000))


def psi(rho: float) -> float:
    """sup_{theta >= 0} -(theta rho + e^{-theta} - 1) = 1 - rho + rho ln rho."""
    if not (0.0 < rho < 1.0):
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    return float(1.0 - rho + rho * np.log(rho))


# ---------------------------------------------------------------- Monte Carlo


@njit(cache=True)
def _sample_maxima(rng, t, n):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        jumps = rng.poisson(t)
        w = 0
        m = 0
        for _ in range(jumps):
            if rng.random() < 0.5:
                w += 1
                if w > m:
                    m = w
            else:
                w -= 1
        out[i] = m
    return out


def sample_maxima(t: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Exact samples of M_t (jump count Poisson(t), fair signs)."""
    _check_t(t)
    return _sample_maxima(rng, float(t), int(n))


@dataclass(frozen=True)
class WalkPaths:
    """Exactly sampled walk paths on [0, t] in compressed row form.

    Walk i occupies value[offsets[i] + r] from time[offsets[i] + r] until the
    next entry (or t); its first entry is (0, 0).
    """

    t: float
    offsets: np.ndarray
    time: np.ndarray
    value: np.ndarray

    @property
    def n(self) -> int:
        return len(self.offsets) - 1


def sample_walk_paths(t: float, n: int, rng: np.random.Generator) -> WalkPaths:
    _check_t(t)
    counts = rng.poisson(t, size=n)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts + 1, out=offsets[1:])
    total = int(offsets[-1])
    time = np.empty(total)
    value = np.empty(total, dtype=np.int64)
    steps = np.where(rng.random(total) < 0.5, 1, -1)
    u = rng.random(total) * t
    for i in range(n):
        a, b = offsets[i], offsets[i + 1]
        time[a] = 0.0
        time[a + 1 : b] = np.sort(u[a + 1 : b])
        steps[a] = 0
        value[a:b] = np.cumsum(steps[a:b])
    return WalkPaths(float(t), offsets, time, value)


def survival_fraction(paths: WalkPaths, barrier: Callable, scale: float = 1.0) -> SurvivalEstimate:
    """Fraction of the given paths staying weakly below a nondecreasing barrier.

    On a constant piece starting at time u the binding constraint is b(u).
    """
    b = np.asarray(barrier(paths.time), dtype=float)
    bad = paths.value > b
    idx = np.repeat(np.arange(paths.n), np.diff(paths.offsets))
    dead = np.zeros(paths.n, dtype=bool)
    dead[idx[bad]] = True
    return SurvivalEstimate.from_counts(int(paths.n - dead.sum()), paths.n, scale)


def _hit_time(m, tau, u):
    """Inverse of u -> P[M_u >= m] at level frac * P[M_tau >= m], by bisection."""

    def g(x):
        return stats.skellam.sf(m - 1, x / 2, x / 2) + stats.skellam.sf(m, x / 2, x / 2)

    target = u * g(tau)
    lo = np.zeros_like(tau)
    hi = tau.copy()
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = g(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return hi


def survival_tail_bound(barrier: Callable, t_max: float) -> float:
    """Bound on P[walk crosses the barrier at some s >= t_max].

    A crossing in [2^i, 2^{i+1}] needs M_{2^{i+1}} > b(2^i); sum the Doob
    bounds over dyadic blocks from floor(log2 t_max) on.
    """
    i0 = int(np.floor(np.log2(t_max)))
    total = 0.0
    for i in range(i0, 1020):
        term = float(doob_tail(float(np.asarray(barrier(np.array([2.0**i])))[0]), 2.0 ** (i + 1)))
        total += term
        if term < 1e-18 * max(total, 1e-300) or (i > i0 + 60 and term < 1e-30):
            return total
    return np.inf


def barrier_survival(
    barrier: Callable,
    shift: float,
    t_max: float,
    n: int,
    rng: np.random.Generator,
    tail_tol: float | None = 1e-3,
) -> SurvivalEstimate:
    """P[W_s <= b(max(s - shift, 0)) for all s <= t_max] by exact block sampling.

    ``barrier`` maps an array of times to nondecreasing levels. From state
    (s, w) a block of length tau is drawn: its endpoint is Skellam, and the
    event that the walk reached level L = floor(b(s)) + 1 inside the block
    has conditional probability p(2(L - w) - a) / p(a) given the endpoint
    a < L - w. On a hit the first-passage time is drawn from its conditional
    law and the walk restarts there at level L, which is a crossing iff
    L > b at that time. Without a hit the walk stayed at or below b(s), which
    is below the barrier throughout the block.

    With ``tail_tol`` set, the event is read as the whole half-line and
    t_max must make the crossing probability after t_max smaller than
    tail_tol; ``tail_tol=None`` estimates the finite-horizon event.
    """
    if n < 1:
        raise ValueError("n must be positive")
    _check_t(t_max, positive=True)
    if shift < 0:
        raise ValueError("shift must be nonnegative")

    def b(s):
        return np.asarray(barrier(np.maximum(np.asarray(s, dtype=float) - shift, 0.0)), dtype=float)

    if tail_tol is not None:
        tail = survival_tail_bound(lambda s: b(s), t_max)
        if not tail <= tail_tol:
            raise HorizonError(f"crossing mass after t_max={t_max} is only bounded by {tail:.3g} > {tail_tol}")

    s = np.zeros(n)
    w = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    dead = 0
    while active.size:
        sa, wa = s[active], w[active]
        level = b(sa)
        inf = ~np.isfinite(level)
        m = np.where(inf, 0, np.floor(np.where(inf, 0, level)).astype(np.int64) + 1 - wa)
        tau = np.minimum(np.maximum(1.0, (m / 2.0) ** 2), t_max - sa)
        tau = np.where(inf, t_max - sa, tau)
        a = rng.poisson(tau / 2) - rng.poisson(tau / 2)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = special.ive(np.abs(2 * m - a), tau) / special.ive(np.abs(a), tau)
        hit = ~inf & ((a >= m) | (rng.random(active.size) < np.where(a >= m, 1.0, np.nan_to_num(ratio))))
        # no hit: advance the whole block
        s[active] = sa + tau
        w[active] = wa + a
        hits = np.nonzero(hit)[0]
        if hits.size:
            hi = active[hits]
            target = wa[hits] + m[hits]
            # a hit above the end-of-block level is a crossing whatever its time
            crossed = target > b(sa[hits] + tau[hits])
            soft = np.nonzero(~crossed)[0]
            if soft.size:
                th = _hit_time(m[hits][soft], tau[hits][soft], rng.random(soft.size))
                s[hi[soft]] = sa[hits][soft] + th
                w[hi[soft]] = target[soft]
                crossed[soft] = target[soft] > b(s[hi[soft]])
            dead += int(crossed.sum())
            keep = np.ones(active.size, dtype=bool)
            keep[hits[crossed]] = False
            active = active[keep]
        active = active[s[active] < t_max]
    return SurvivalEstimate.from_counts(n - dead, n)

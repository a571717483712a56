"""One-dimensional MDLA: simulation, the Y_t process, S(t) and regenerations."""

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit
from scipy import stats

from . import _engine1d
from ._paths import holding, reach, step_1d, tail_rate
from .barrier import y_alpha
from .front import FrontPath, _check_time, speed_event, y_query
from .walk import SurvivalEstimate, barrier_survival, doob_tail, sample_walk_paths, survival_fraction

__all__ = [
    "FrontPath",
    "ParticleTable",
    "RunRecord",
    "SimConfig",
    "WindowBudgetError",
    "LeakageWarning",
    "detect_regenerations",
    "simulate_1d",
    "s_estimate",
    "s_lower_bound",
    "speed_event",
    "y_query",
]

DEFAULT_ALPHA = 0.25
DEFAULT_MAX_PARTICLES = 20_000_000
DEFAULT_MAX_SITES = 10_000_000


class WindowBudgetError(RuntimeError):
    """The finite window cannot certify the requested leakage tolerance."""


class LeakageWarning(RuntimeWarning):
    """A lazily materialized particle would have touched the aggregate earlier."""


@dataclass(frozen=True)
class SimConfig:
    k_density: float
    horizon: float
    master_seed: int = 0
    leakage_tol: float = 1e-3
    record_particles: bool = False
    adhesion: bool = True
    # draw the field at this density and keep each particle w.p. k_density / thin_from
    thin_from: float | None = None
    max_particles: int = DEFAULT_MAX_PARTICLES
    dimension: int = 1
    # grid sites available to the d-dimensional engine
    max_sites: int = DEFAULT_MAX_SITES

    def __post_init__(self):
        if not (np.isfinite(self.k_density) and self.k_density >= 0):
            raise ValueError("k_density must be finite and >= 0")
        if not (np.isfinite(self.horizon) and self.horizon >= 0):
            raise ValueError("horizon must be finite and >= 0")
        if not (0.0 < self.leakage_tol < 1.0):
            raise ValueError("leakage_tol must lie in (0, 1)")
        if self.thin_from is not None and self.thin_from < self.k_density:
            raise ValueError("thin_from must be at least k_density")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError("dimension must be a positive integer")

    @property
    def field_density(self) -> float:
        return self.k_density if self.thin_from is None else float(self.thin_from)

    @property
    def keep_fraction(self) -> float:
        if self.thin_from is None or self.thin_from == 0:
            return 1.0
        return self.k_density / self.thin_from

    @property
    def seed(self) -> np.uint64:
        return np.uint64(self.master_seed % 2**64)


@dataclass(frozen=True)
class ParticleTable:
    """Materialized particles; their paths are replayable from the keys.

    t_freeze is +inf for particles active at the horizon and -1 for particles
    whose replayed history touched the aggregate before materialization.
    """

    site: np.ndarray
    index: np.ndarray
    key: np.ndarray
    t_mat: np.ndarray
    t_freeze: np.ndarray
    final_position: np.ndarray
    horizon: float
    rate: float = 1.0

    def __len__(self):
        return len(self.site)

    def active_at(self, t: float) -> np.ndarray:
        return self.t_freeze > t

    def trajectory(self, i: int, t_end: float | None = None):
        """(times, positions) of particle i's free path on [0, t_end]."""
        t_end = self.horizon if t_end is None else t_end
        t_end = min(t_end, self.t_freeze[i]) if self.t_freeze[i] >= 0 else t_end
        return _replay_1d(self.key[i], self.site[i], t_end)

    def positions_at(self, t: float) -> np.ndarray:
        """Positions at time t (frozen particles sit where they froze)."""
        return _positions_at(self.key, self.site, self.t_freeze, float(t))


@njit(cache=True)
def _replay_1d(key, start, t_end):
    times = [0.0]
    pos = [start]
    tau = 0.0
    z = start
    k = 0
    while True:
        tau += holding(key, k, 1.0)
        # at a freeze time the attempted jump does not happen
        if tau >= t_end:
            break
        z += step_1d(key, k)
        times.append(tau)
        pos.append(z)
        k += 1
    return np.array(times), np.array(pos)


@njit(cache=True)
def _positions_at(keys, sites, t_freeze, t):
    out = np.empty(len(keys), dtype=np.int64)
    for i in range(len(keys)):
        stop = min(t, t_freeze[i]) if t_freeze[i] >= 0 else t
        tau = 0.0
        z = sites[i]
        k = 0
        while True:
            tau += holding(keys[i], k, 1.0)
            if tau >= stop:
                break
            z += step_1d(keys[i], k)
            k += 1
        out[i] = z
    return out


@dataclass(frozen=True)
class RunRecord:
    config: SimConfig
    front: FrontPath
    event_count: int
    frozen_count: int
    leakage_bound: float
    materialized_count: int
    leak_events: int
    particle_history: ParticleTable | None = None

    def summary(self) -> dict:
        return {
            "config": asdict(self.config),
            "final_front": int(self.front.positions[-1]) if self.front.positions.size else 0,
            "front_jumps": int(self.front.jump_times.size),
            "event_count": self.event_count,
            "frozen_count": self.frozen_count,
            "materialized_count": self.materialized_count,
            "leak_events": self.leak_events,
            "leakage_bound": self.leakage_bound,
        }


def _window_plan(cfg: SimConfig):
    """Window cap, materialization accuracy and the budget spent on the cap."""
    k0 = cfg.field_density
    T = cfg.horizon
    q = cfg.leakage_tol / 4.0
    x_cap = int(stats.poisson.isf(q, k0 * T)) + 1 if k0 * T > 0 else 0
    window = x_cap + 2
    for _ in range(3):
        # per-particle accuracy, union over the ~k0 * window particles materialized
        log_inv_eps = float(np.log(4.0 * max(k0, 1e-300) * window / cfg.leakage_tol))
        window = x_cap + int(reach(T, log_inv_eps)) + 2
    return window, log_inv_eps, q


def _unmaterialized_bound(k: float, first_site: int, x: int, horizon: float) -> float:
    """Expected number of never-materialized particles that could reach X + 1."""
    if k == 0 or horizon == 0:
        return 0.0
    total = 0.0
    g = first_site - x - 1
    while True:
        term = float(doob_tail(g, horizon))
        total += term
        if term < 1e-20 * max(total, 1e-300) or term == 0.0:
            break
        g += 1
    return k * total


def simulate_1d(config: SimConfig) -> RunRecord:
    """Exact event-driven simulation of the right half-line process."""
    cfg = config
    if cfg.dimension != 1:
        raise ValueError("simulate_1d needs dimension 1; use simulate_d")
    if cfg.k_density == 0 or cfg.horizon == 0:
        return RunRecord(cfg, FrontPath.empty(cfg.horizon), 0, 0, 0.0, 0, 0, _empty_table(cfg) if cfg.record_particles else None)
    window, log_inv_eps, cap_budget = _window_plan(cfg)
    mean_particles = cfg.field_density * window
    capacity = int(mean_particles + 10 * np.sqrt(mean_particles) + 100)
    if capacity > cfg.max_particles:
        raise WindowBudgetError(
            f"certified window needs ~{capacity} particles, above the cap of {cfg.max_particles}"
        )
    out = _engine1d.simulate_kernel(
        cfg.seed,
        float(cfg.field_density),
        float(cfg.keep_fraction),
        float(cfg.horizon),
        bool(cfg.adhesion),
        int(window),
        log_inv_eps,
        capacity,
    )
    status, n_p, nj, events, leaks, next_site, x, site, idx, key, pos, k, tmat, tfreeze, jt = out
    if status & _engine1d.PARTICLES_EXCEEDED:
        raise WindowBudgetError("particle capacity exhausted")
    if status & _engine1d.WINDOW_EXCEEDED:
        raise WindowBudgetError(f"front came within reach of the window edge {window}")
    front = FrontPath(jt[:nj].copy(), np.arange(1, nj + 1, dtype=np.int64), float(cfg.horizon))
    if leaks:
        warnings.warn(f"{leaks} particle(s) interacted before materialization", LeakageWarning, stacklevel=2)
        bound = 1.0
    else:
        # each materialized particle leaked with probability at most eps
        bound = cap_budget + n_p * np.exp(-log_inv_eps) + _unmaterialized_bound(cfg.k_density, int(next_site), int(x), cfg.horizon)
        bound = min(bound, 1.0)
    tf = tfreeze[:n_p]
    table = None
    if cfg.record_particles:
        table = ParticleTable(
            site[:n_p].copy(), idx[:n_p].copy(), key[:n_p].copy(), tmat[:n_p].copy(), tf.copy(), pos[:n_p].copy(), float(cfg.horizon)
        )
    return RunRecord(
        config=cfg,
        front=front,
        event_count=int(events),
        frozen_count=int(np.sum(np.isfinite(tf) & (tf >= 0))),
        leakage_bound=float(bound),
        materialized_count=int(n_p),
        leak_events=int(leaks),
        particle_history=table,
    )


def _empty_table(cfg):
    z = np.zeros(0, dtype=np.int64)
    return ParticleTable(z, z, np.zeros(0, dtype=np.uint64), np.zeros(0), np.zeros(0), z, float(cfg.horizon))


# ------------------------------------------------------------------- S(t)


def _check_k(k_density):
    if not (np.isfinite(k_density) and k_density >= 0):
        raise ValueError("k_density must be finite and >= 0")


def s_estimate(
    path: FrontPath,
    t: float,
    n: int,
    rng: np.random.Generator,
    k_density: float,
    walks=None,
) -> SurvivalEstimate:
    """Monte Carlo estimate of S(t) = (K/2) P[W_s <= Y_t(s) for all s <= t].

    By default walks are drawn with the exact block sampler; passing
    ``walks`` (from ``sample_walk_paths``) evaluates a fixed sample instead,
    so two histories can be compared on common random numbers.
    """
    _check_time(path, t)
    _check_k(k_density)
    scale = k_density / 2.0
    if t == 0:
        return SurvivalEstimate(scale, 0.0, int(n))

    def barrier(s):
        return y_query(path, t, np.minimum(s, t))

    if walks is not None:
        return survival_fraction(walks, barrier, scale)
    est = barrier_survival(barrier, 0.0, t, int(n), rng, tail_tol=None)
    return SurvivalEstimate(scale * est.point_estimate, scale * est.standard_error, est.n_samples)


def s_lower_bound(path: FrontPath, t: float, i: int, k_density: float) -> float:
    """(K/10) 2^{-i/2} prod_{i' >= i} (1 - e^{1 - max(1, j_i' / sqrt 2)}), j_i' = Y_t(2^i') 2^{-i'/2}."""
    _check_time(path, t)
    _check_k(k_density)
    if i < 0:
        raise ValueError("i must be nonnegative")
    prod = 1.0
    ip = i
    while 2.0**ip <= t:
        j = y_query(path, t, 2.0**ip) * 2.0 ** (-ip / 2.0)
        prod *= 1.0 - np.exp(1.0 - max(1.0, j / np.sqrt(2.0)))
        ip += 1
    return float(k_density / 10.0 * 2.0 ** (-i / 2.0) * prod)


# ----------------------------------------------------------- regenerations


@njit(cache=True)
def _front_gaps(jt, horizon, alpha):
    """inf_s Y_t(s) - y_alpha(s) at t = 0, 1, ..., floor(horizon)."""
    n_t = int(np.floor(horizon)) + 1
    out = np.empty(n_t)
    nj = len(jt)
    c = alpha ** -1.5
    m = 0
    for t in range(n_t):
        while m < nj and jt[m] <= t:
            m += 1
        xt = m
        best = xt - y_alpha(alpha, float(t))
        # jumps within the flat stretch contribute nonnegative terms
        for i in range(m):
            s = t - jt[i]
            if s <= c:
                break
            v = xt - (i + 1) - y_alpha(alpha, s)
            if v < best:
                best = v
        out[t] = best
    return out


@njit(cache=True)
def _particle_violations(jt, x_int, alpha, candidate, viol, keys, sites, t_freeze, horizon):
    """Mark integer times at which some live particle's past dips below X_t - y_alpha.

    A particle that sat at z until time e contributes z + y_alpha(t - e);
    condition (2) fails at t if this is <= X_t. A later piece with a lower
    position dominates an earlier one for every later t, so a monotone
    deque (positions increasing from the front) keeps all relevant pieces.
    Only times that are still open (front condition holds, no violation
    found yet) are visited.
    """
    n_t = len(x_int)
    cap = 1024
    dz = np.empty(cap, dtype=np.int64)
    de = np.empty(cap)
    open_t = np.nonzero(candidate & ~viol)[0]
    for p in range(len(keys)):
        if p % 256 == 0:
            open_t = np.nonzero(candidate & ~viol)[0]
        tf = t_freeze[p]
        if tf < 0 or open_t.size == 0:
            continue
        last = min(n_t - 1, int(np.ceil(tf)) - 1) if np.isfinite(tf) else n_t - 1
        stop = np.searchsorted(open_t, last, side="right")
        if stop == 0:
            continue
        key = keys[p]
        z = sites[p]
        k = 0
        tau_next = holding(key, 0, 1.0)
        head = 0
        tail = 0
        for r in range(stop):
            t = open_t[r]
            # close every piece that ended by time t
            while tau_next <= t:
                if tail == cap:
                    live = tail - head
                    if head > 0:
                        dz[:live] = dz[head:tail]
                        de[:live] = de[head:tail]
                    else:
                        cap *= 2
                        nz = np.empty(cap, dtype=np.int64)
                        ne = np.empty(cap)
                        nz[:live] = dz[:live]
                        ne[:live] = de[:live]
                        dz = nz
                        de = ne
                    head = 0
                    tail = live
                while tail > head and dz[tail - 1] >= z:
                    tail -= 1
                dz[tail] = z
                de[tail] = tau_next
                tail += 1
                z += step_1d(key, k)
                k += 1
                tau_next += holding(key, k, 1.0)
            if viol[t]:
                continue
            xt = x_int[t]
            for q in range(head, tail):
                if dz[q] > xt:
                    break
                if dz[q] + y_alpha(alpha, t - de[q]) <= xt:
                    viol[t] = True
                    break
    return viol


def regeneration_scan(run: RunRecord, alpha: float = DEFAULT_ALPHA):
    """Per integer time: (front condition holds, particle condition holds)."""
    if run.particle_history is None:
        raise ValueError("regeneration detection needs a run with record_particles=True")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    path = run.front
    gaps = _front_gaps(path.jump_times, path.horizon, float(alpha))
    front_ok = gaps >= 0
    n_t = len(gaps)
    x_int = np.searchsorted(path.jump_times, np.arange(n_t), side="right").astype(np.int64)
    table = run.particle_history
    candidate = front_ok.copy()
    candidate[0] = False
    viol = np.zeros(n_t, dtype=np.bool_)
    _particle_violations(path.jump_times, x_int, float(alpha), candidate, viol, table.key, table.site, table.t_freeze, path.horizon)
    return front_ok, ~viol


def detect_regenerations(run: RunRecord, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Integer times t <= horizon at which the front dominates y_alpha and no live
    particle's past crossed the receding barrier X_t - y_alpha(s).

    t = 0 always qualifies. Never-materialized particles are counted as
    satisfying the particle condition; the chance that one does not is part
    of the run's leakage bound.
    """
    front_ok, particles_ok = regeneration_scan(run, alpha)
    return np.nonzero(front_ok & particles_ok)[0]

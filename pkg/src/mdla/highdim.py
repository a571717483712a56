"""MDLA on Z^d for d >= 2, conforming particles and the exponential race."""

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit
from scipy import stats

from . import _engined
from ._paths import direction, holding, reach
from .core import LeakageWarning, RunRecord, SimConfig, WindowBudgetError
from .front import FrontPath
from .walk import doob_tail

__all__ = [
    "AggregateSet",
    "HighDimRecord",
    "RaceResult",
    "conforming_count",
    "race_monte_carlo",
    "race_stats",
    "simulate_d",
    "speed_threshold",
]


@dataclass(frozen=True)
class AggregateSet:
    """Frozen sites with their join times; the origin joins at time 0."""

    sites: np.ndarray
    join_times: np.ndarray

    def __post_init__(self):
        if len(self.sites) != len(self.join_times):
            raise ValueError("sites and join_times must have equal length")

    @property
    def occupied(self) -> set:
        return {tuple(int(c) for c in s) for s in self.sites}

    def at(self, t: float) -> "AggregateSet":
        keep = self.join_times <= t
        return AggregateSet(self.sites[keep], self.join_times[keep])

    @property
    def rightmost(self) -> tuple:
        """Site of maximal first coordinate; ties go to the earliest freeze."""
        x = self.sites[:, 0].max()
        cand = np.nonzero(self.sites[:, 0] == x)[0]
        i = cand[np.argmin(self.join_times[cand])]
        return tuple(int(c) for c in self.sites[i])

    @property
    def rightmost_first_coord(self) -> int:
        return int(self.sites[:, 0].max())

    @property
    def diameter(self) -> int:
        """l-infinity diameter: the longest side of the bounding box."""
        return int((self.sites.max(axis=0) - self.sites.min(axis=0)).max())


@dataclass(frozen=True)
class ParticleTableD:
    """Materialized particles of a d-dimensional run (t_freeze as in 1D)."""

    site: np.ndarray
    index: np.ndarray
    key: np.ndarray
    t_mat: np.ndarray
    t_freeze: np.ndarray
    final_position: np.ndarray
    horizon: float

    def __len__(self):
        return len(self.index)

    @property
    def dimension(self) -> int:
        return self.site.shape[1]

    def positions_at(self, t: float) -> np.ndarray:
        return _positions_at_d(self.key, self.site, self.t_freeze, float(t))


@dataclass(frozen=True)
class HighDimRecord(RunRecord):
    """RunRecord plus the d-dimensional outputs.

    diameter_series rows are (time, diameter, X_t), one per change;
    rightmost_history rows pair u_times with the site U_t taken at each
    front increase.
    """

    diameter_series: np.ndarray = None
    rightmost_history: np.ndarray = None
    u_times: np.ndarray = None
    aggregate: AggregateSet = None

    @property
    def dimension(self) -> int:
        return self.config.dimension

    def diameter_at(self, t: float) -> int:
        ds = self.diameter_series
        i = np.searchsorted(ds[:, 0], t, side="right") - 1
        return int(ds[i, 1])

    def rightmost_at(self, t: float) -> tuple:
        i = np.searchsorted(self.u_times, t, side="right") - 1
        return tuple(int(c) for c in self.rightmost_history[i])

    def summary(self) -> dict:
        out = super().summary()
        out["dimension"] = self.dimension
        out["final_diameter"] = int(self.diameter_series[-1, 1])
        out["aggregate_size"] = int(len(self.aggregate.sites))
        return out


@njit(cache=True)
def _positions_at_d(keys, sites, t_freeze, t):
    n, d = sites.shape
    out = sites.copy()
    for i in range(n):
        stop = min(t, t_freeze[i]) if t_freeze[i] >= 0 else t
        tau = 0.0
        k = 0
        while True:
            tau += holding(keys[i], k, float(d))
            if tau >= stop:
                break
            dirn = direction(keys[i], k, 2 * d)
            out[i, dirn // 2] += 1 if dirn % 2 == 0 else -1
            k += 1
    return out


def _box_plan(cfg: SimConfig):
    """Grid half-width, materialization accuracy and the budget spent on the grid.

    The grid is an allocation plan: the aggregate's extent in each
    direction is budgeted at the Poisson(K T) quantile that bounds the 1D
    front. A run whose aggregate plus reach outgrows the grid stops with
    WindowBudgetError, so the plan never silently truncates the cloud.
    """
    d = cfg.dimension
    k0 = cfg.field_density
    T = cfg.horizon
    q = cfg.leakage_tol / 4.0
    ext = int(stats.poisson.isf(q / (2 * d), k0 * T)) + 1 if k0 * T > 0 else 0
    half = ext + 2
    for _ in range(3):
        # union over every site of the grid and both directions of each coordinate
        n_sites = float(2 * half + 1) ** d
        log_inv_eps = float(np.log(4.0 * max(k0, 1e-300) * n_sites * 2 * d / cfg.leakage_tol))
        half = ext + int(reach(T, log_inv_eps)) + 2
    return half, log_inv_eps, q


def _unmaterialized_bound_d(k, lo, hi, r_gap, horizon):
    """Expected number of never-materialized particles that could come adjacent to the aggregate box."""
    if k == 0 or horizon == 0:
        return 0.0
    side = (np.asarray(hi) - np.asarray(lo) + 1).astype(float)
    d = len(side)
    total = 0.0
    m = r_gap + 1
    while True:
        shell = np.prod(side + 2 * m) - np.prod(side + 2 * m - 2)
        term = shell * 2 * d * float(doob_tail(m - 1, horizon))
        total += term
        if term == 0.0 or term < 1e-20 * max(total, 1e-300):
            break
        m += 1
    return k * total


def simulate_d(config: SimConfig) -> HighDimRecord:
    """Exact event-driven simulation on Z^d: particles jump at rate 1/2 in each of 2d directions."""
    cfg = config
    d = int(cfg.dimension)
    if d < 2:
        raise ValueError("simulate_d needs dimension >= 2")
    origin = np.zeros((1, d), dtype=np.int64)
    if cfg.k_density == 0 or cfg.horizon == 0:
        agg = AggregateSet(origin, np.zeros(1))
        table = ParticleTableD(np.zeros((0, d), np.int64), np.zeros(0, np.int64), np.zeros(0, np.uint64), np.zeros(0), np.zeros(0), np.zeros((0, d), np.int64), float(cfg.horizon)) if cfg.record_particles else None
        return HighDimRecord(
            cfg, FrontPath.empty(cfg.horizon), 0, 0, 0.0, 0, 0, table,
            diameter_series=np.zeros((1, 3)), rightmost_history=origin, u_times=np.zeros(1), aggregate=agg,
        )
    half, log_inv_eps, cap_budget = _box_plan(cfg)
    n_sites = float(2 * half + 1) ** d
    if n_sites > cfg.max_sites:
        raise WindowBudgetError(
            f"certified box of half-width {half} has {n_sites:.3g} sites, above the cap of {cfg.max_sites}"
        )
    mean_particles = cfg.field_density * n_sites
    capacity = int(min(mean_particles + 10 * np.sqrt(mean_particles) + 100, cfg.max_particles))
    out = _engined.simulate_d_kernel(
        cfg.seed, d, float(cfg.field_density), float(cfg.keep_fraction), float(cfg.horizon),
        bool(cfg.adhesion), log_inv_eps, int(half), capacity,
    )
    (status, n_p, events, leaks, mlo, mhi, alo, ahi, x_times, u_arr, u_times,
     d_times, d_diam, d_x, agg_sites, agg_times, site, idx, key, tmat, tfreeze, pos) = out
    if status & _engined.PARTICLES_EXCEEDED:
        raise WindowBudgetError(f"particle capacity {capacity} exhausted")
    if status & _engined.WINDOW_EXCEEDED:
        raise WindowBudgetError(f"aggregate came within reach of the grid edge {half}")
    front = FrontPath(x_times, np.arange(1, len(x_times) + 1, dtype=np.int64), float(cfg.horizon))
    if leaks:
        warnings.warn(f"{leaks} particle(s) interacted before materialization", LeakageWarning, stacklevel=2)
        bound = 1.0
    else:
        gap = int(np.min(np.concatenate([alo - mlo, mhi - ahi])))
        mat = n_p * 2 * d * np.exp(-log_inv_eps)
        bound = min(1.0, cap_budget + mat + _unmaterialized_bound_d(cfg.k_density, alo, ahi, gap, cfg.horizon))
    order = np.lexsort((agg_times,))
    aggregate = AggregateSet(agg_sites[order], agg_times[order])
    table = ParticleTableD(site, idx, key, tmat, tfreeze, pos, float(cfg.horizon)) if cfg.record_particles else None
    return HighDimRecord(
        config=cfg,
        front=front,
        event_count=int(events),
        frozen_count=int(np.sum(np.isfinite(tfreeze) & (tfreeze >= 0))),
        leakage_bound=float(bound),
        materialized_count=int(n_p),
        leak_events=int(leaks),
        particle_history=table,
        diameter_series=np.column_stack([d_times, d_diam.astype(float), d_x.astype(float)]),
        rightmost_history=u_arr,
        u_times=u_times,
        aggregate=aggregate,
    )


# ------------------------------------------------------------ conforming


@njit(cache=True)
def _conforming(keys, sites, t_freeze, x_times, t, x_t):
    """Offset Z_1(t) - X_t of each conforming particle, 0 if not conforming."""
    n, d = sites.shape
    off = np.zeros(n, dtype=np.int64)
    last = np.empty((n, d), dtype=np.int64)
    for i in range(n):
        last[i, :] = sites[i]
        if t_freeze[i] <= t:
            continue
        z = sites[i].copy()
        tau = 0.0
        k = 0
        ok = True
        while True:
            nxt = tau + holding(keys[i], k, float(d))
            end = min(nxt, t)
            # X over [tau, end] peaks at its value just before end (or at t itself)
            x_end = np.searchsorted(x_times, end, side="right") if end >= t else np.searchsorted(x_times, end, side="left")
            if z[0] <= x_end:
                ok = False
                break
            if nxt >= t:
                break
            dirn = direction(keys[i], k, 2 * d)
            z[dirn // 2] += 1 if dirn % 2 == 0 else -1
            tau = nxt
            k += 1
        last[i, :] = z
        if ok:
            off[i] = z[0] - x_t
    return off, last


def conforming_count(run: HighDimRecord, t: float, max_offset: int = 10, transverse_radius: int | None = None):
    """Conforming particles at time t by first-coordinate offset from X_t.

    A particle is conforming when its first coordinate stayed strictly above
    X_s for every s <= t. Returns (counts, n_columns): counts[j - 1] is the
    number of conforming particles at offset j = 1..max_offset whose other
    coordinates lie within transverse_radius of U_t (all if None), and
    n_columns is the number of transverse positions that window covers.
    """
    table = run.particle_history
    if table is None:
        raise ValueError("conforming_count needs a run with record_particles=True")
    if not 0 <= t <= run.front.horizon:
        raise ValueError("t must lie in [0, horizon]")
    x_t = run.front.value(t)
    off, pos = _conforming(table.key, table.site, table.t_freeze, run.front.jump_times, float(t), int(x_t))
    keep = off > 0
    d = table.dimension
    n_cols = None
    if transverse_radius is not None:
        u = np.asarray(run.rightmost_at(t))
        keep &= np.all(np.abs(pos[:, 1:] - u[1:]) <= transverse_radius, axis=1)
        n_cols = (2 * transverse_radius + 1) ** (d - 1)
    counts = np.bincount(off[keep], minlength=max_offset + 1)[1 : max_offset + 1]
    return counts, n_cols


# ---------------------------------------------------------------- race


@dataclass(frozen=True)
class RaceResult:
    p_race: float
    expected_increment_time: float
    gamma: float
    dimension: int
    p_stderr: float = 0.0
    time_stderr: float = 0.0


def _check_race(gamma, d):
    if not (np.isfinite(gamma) and gamma > 0):
        raise ValueError("gamma must be positive")
    if int(d) != d or d < 2:
        raise ValueError("dimension must be an integer >= 2")


def race_stats(gamma: float, d: int) -> RaceResult:
    """P[V1 >= V2 + V3 + V4] in closed form and E min(V1, V2 + V3 + V4) = (1 - p) / gamma."""
    _check_race(gamma, d)
    p = (d - 1) / (2.0 * (2 * d - 1)) * d / (gamma + d)
    return RaceResult(p, (1.0 - p) / gamma, float(gamma), int(d))


def race_monte_carlo(gamma: float, d: int, n: int, rng: np.random.Generator) -> RaceResult:
    """Sample V1 ~ Exp(gamma), V2 ~ Exp((2d-2)/(2d) gamma), V3 ~ Exp(d), V4 ~ Exp(gamma)."""
    _check_race(gamma, d)
    if n < 10_000:
        raise ValueError("n must be at least 10^4")
    v1 = rng.exponential(1.0 / gamma, n)
    v2 = rng.exponential(2.0 * d / ((2 * d - 2) * gamma), n)
    v3 = rng.exponential(1.0 / d, n)
    v4 = rng.exponential(1.0 / gamma, n)
    detour = v2 + v3 + v4
    won = v1 >= detour
    t = np.minimum(v1, detour)
    p = won.mean()
    return RaceResult(
        float(p), float(t.mean()), float(gamma), int(d),
        p_stderr=float(np.sqrt(p * (1 - p) / n)), time_stderr=float(t.std(ddof=1) / np.sqrt(n)),
    )


def speed_threshold(d: int) -> Fraction:
    """(3d - 1) / (4d - 2): the density above which the race argument gives linear growth."""
    if int(d) != d or d < 2:
        raise ValueError("dimension must be an integer >= 2")
    return Fraction(3 * d - 1, 4 * d - 2)

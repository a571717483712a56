"""The barrier family y_alpha and front-history diagnostics built on it."""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .front import FrontPath, _check_time, y_query


def _check_alpha(alpha):
    if not (np.isfinite(alpha) and alpha > 0):
        raise ValueError(f"alpha must be positive, got {alpha}")


@njit(cache=True)
def y_alpha(alpha, s):
    """Scalar barrier: 0 up to alpha^{-3/2}, then min(alpha (s - c), sqrt(s) log2 s)."""
    c = alpha ** -1.5
    if s <= c:
        return 0.0
    lin = alpha * (s - c)
    cap = np.sqrt(s) * np.log2(s) if s > 1.0 else 0.0
    return min(lin, cap)


def barrier_eval(alpha: float, s):
    """y_alpha(s), vectorized in s."""
    _check_alpha(alpha)
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("s must be nonnegative")
    c = alpha ** -1.5
    with np.errstate(divide="ignore", invalid="ignore"):
        cap = np.where(s > 1.0, np.sqrt(s) * np.log2(np.maximum(s, 1.0)), 0.0)
    out = np.where(s <= c, 0.0, np.minimum(alpha * (s - c), cap))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Barrier:
    alpha: float

    def __post_init__(self):
        _check_alpha(self.alpha)

    @property
    def flat_end(self) -> float:
        return self.alpha ** -1.5

    def __call__(self, s):
        return barrier_eval(self.alpha, s)


@dataclass(frozen=True)
class PermissiveProfile:
    """Entries (i, satisfied, observed Y_t(2^i), threshold 10 i 2^{i/2})."""

    scales: tuple

    def satisfied(self, i: int) -> bool:
        for entry in self.scales:
            if entry[0] == i:
                return entry[1]
        raise KeyError(i)


def permissive_threshold(i: int) -> float:
    return 10.0 * i * 2.0 ** (i / 2.0)


def permissive_check(path: FrontPath, t: float, i_min: int, i_max: int) -> PermissiveProfile:
    _check_time(path, t)
    if i_min < 0 or i_max < i_min:
        raise ValueError("need 0 <= i_min <= i_max")
    scales = []
    for i in range(i_min, i_max + 1):
        observed = y_query(path, t, 2.0**i)
        thr = permissive_threshold(i)
        scales.append((i, bool(observed >= thr), float(observed), thr))
    return PermissiveProfile(tuple(scales))


def jump_offsets(path: FrontPath, t: float) -> np.ndarray:
    """Offsets s = t - tau at which Y_t - y_alpha can attain its infimum."""
    jt = path.jump_times[path.jump_times <= t]
    return np.concatenate([[float(t)], t - jt])


@njit(cache=True)
def _gap_at(jump_times, positions, t, alpha):
    n = np.searchsorted(jump_times, t, side="right")
    xt = positions[n - 1] if n > 0 else 0
    best = xt - y_alpha(alpha, t)
    for i in range(n):
        v = xt - positions[i] - y_alpha(alpha, t - jump_times[i])
        if v < best:
            best = v
    return best


def barrier_gap(path: FrontPath, t: float, alpha: float, s_grid=None) -> float:
    """inf_s Y_t(s) - y_alpha(s); nonnegative iff the history dominates the barrier.

    Y_t is constant on the pieces between jump offsets and y_alpha is
    nondecreasing, so the infimum is attained at s = t - tau for jump times
    tau <= t, or at s = t. A user grid must contain all of these.
    """
    _check_time(path, t)
    _check_alpha(alpha)
    if s_grid is None:
        return float(_gap_at(path.jump_times, path.positions, float(t), float(alpha)))
    grid = np.asarray(s_grid, dtype=float)
    need = jump_offsets(path, t)
    grid_sorted = np.sort(grid)
    pos = np.clip(np.searchsorted(grid_sorted, need), 0, max(len(grid_sorted) - 1, 0))
    near = np.minimum(
        np.abs(grid_sorted[pos] - need) if grid_sorted.size else np.full(need.shape, np.inf),
        np.abs(grid_sorted[np.maximum(pos - 1, 0)] - need) if grid_sorted.size else np.inf,
    )
    if np.any(near > 1e-12 * np.maximum(1.0, need)):
        raise ValueError("s_grid misses jump offsets; the infimum would not be exact")
    return float(_gap_at(path.jump_times, path.positions, float(t), float(alpha)))

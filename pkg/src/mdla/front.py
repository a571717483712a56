"""Front trajectories X_t and the increment process Y_t(s) = X_t - X_{t-s}."""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FrontPath:
    """Right-continuous step function X_t on [0, horizon] with X_0 = 0."""

    jump_times: np.ndarray
    positions: np.ndarray
    horizon: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        jt = np.asarray(self.jump_times, dtype=float)
        pos = np.asarray(self.positions, dtype=np.int64)
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "positions", pos)
        if jt.shape != pos.shape or jt.ndim != 1:
            raise ValueError("jump_times and positions must be 1-d and of equal length")
        if jt.size:
            if np.any(np.diff(jt) <= 0) or jt[0] <= 0:
                raise ValueError("jump times must be positive and strictly increasing")
            if np.any(np.diff(pos) < 1) or pos[0] < 1:
                raise ValueError("positions must increase by at least 1 per jump")
            if jt[-1] > self.horizon:
                raise ValueError("jump after the horizon")
        if self.horizon < 0:
            raise ValueError("negative horizon")

    @classmethod
    def empty(cls, horizon: float) -> "FrontPath":
        return cls(np.zeros(0), np.zeros(0, dtype=np.int64), float(horizon))

    def value(self, u):
        """X_u (vectorized); X_u = 0 for u < first jump."""
        u = np.asarray(u, dtype=float)
        idx = np.searchsorted(self.jump_times, u, side="right") - 1
        pos = np.concatenate([[0], self.positions])
        return pos[idx + 1]

    def truncated(self, t: float) -> "FrontPath":
        keep = self.jump_times <= t
        return FrontPath(self.jump_times[keep], self.positions[keep], float(t))

    def without_jump(self, i: int) -> "FrontPath":
        """Same path with jump i removed and later positions lowered by its size."""
        size = self.positions[i] - (self.positions[i - 1] if i > 0 else 0)
        pos = self.positions.copy()
        pos[i + 1 :] -= size
        return FrontPath(np.delete(self.jump_times, i), np.delete(pos, i), self.horizon)


def _check_time(path: FrontPath, t: float):
    if not (0 <= t <= path.horizon):
        raise ValueError(f"t={t} outside the recorded horizon [0, {path.horizon}]")


def y_query(path: FrontPath, t: float, s):
    """Y_t(s) = X_t - X_{t-s} for s <= t, +inf for s > t (vectorized in s)."""
    _check_time(path, t)
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("s must be nonnegative")
    inside = s <= t
    y = np.where(inside, path.value(t) - path.value(np.where(inside, t - s, 0.0)), np.inf)
    return y if y.ndim else float(y)


def speed_event(path: FrontPath, t: float, s: float, gamma: float) -> bool:
    """True iff X_{t+s} - X_t >= gamma * s."""
    if s <= 0 or gamma < 0:
        raise ValueError("need s > 0 and gamma >= 0")
    _check_time(path, t)
    _check_time(path, t + s)
    return bool(path.value(t + s) - path.value(t) >= gamma * s)

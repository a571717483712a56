"""Growth-exponent and speed fits for front series."""

from dataclasses import dataclass

import numpy as np

from .front import FrontPath

MIN_POINTS = 20


class DegenerateWindowError(ValueError):
    """The fit window has too few points or a constant series."""


@dataclass(frozen=True)
class FitResult:
    """exponent/speed with standard errors; speed is exp(intercept) for power-law fits.

    Pooled fits average per-series estimates and report the between-series
    standard error. fit_speed leaves the exponent fields as nan.
    """

    exponent: float
    exponent_stderr: float
    speed: float
    speed_stderr: float
    fit_window: tuple
    r_squared: float
    n_points: int
    n_excluded: int = 0
    n_series: int = 1

    def __post_init__(self):
        lo, hi = self.fit_window
        if not lo < hi:
            raise ValueError("fit window needs t_lo < t_hi")


def front_series(path: FrontPath, times) -> np.ndarray:
    """(time, X_time) rows for the given sample times."""
    times = np.asarray(times, dtype=float)
    return np.column_stack([times, path.value(times)])


def sample_times(window, n: int = 200, log: bool = False) -> np.ndarray:
    lo, hi = window
    if log:
        return np.geomspace(max(lo, 1e-12), hi, n)
    return np.linspace(lo, hi, n)


def _linfit(x, y):
    n = len(x)
    xm = x.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (y - y.mean())) / sxx
    icpt = y.mean() - slope * xm
    resid = y - icpt - slope * x
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    s2 = ss_res / (n - 2) if n > 2 else 0.0
    se_slope = np.sqrt(s2 / sxx)
    se_icpt = np.sqrt(s2 * (1.0 / n + xm**2 / sxx))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return slope, icpt, se_slope, se_icpt, min(max(r2, 0.0), 1.0)


def _as_series_list(series):
    arr = series if isinstance(series, (list, tuple)) else [series]
    if isinstance(series, np.ndarray) and series.ndim == 3:
        arr = list(series)
    out = []
    for s in arr:
        s = np.asarray(s, dtype=float)
        if s.ndim != 2 or s.shape[1] != 2:
            raise ValueError("each series must be an array of (time, value) rows")
        if np.any(np.diff(s[:, 0]) < 0):
            raise ValueError("series times must be nondecreasing")
        out.append(s)
    return out


def _in_window(s, window):
    lo, hi = window
    if not lo < hi:
        raise DegenerateWindowError("fit window needs t_lo < t_hi")
    m = (s[:, 0] >= lo) & (s[:, 0] <= hi)
    if m.sum() < MIN_POINTS:
        raise DegenerateWindowError(f"fit window holds {int(m.sum())} points, need {MIN_POINTS}")
    w = s[m]
    if np.all(w[:, 1] == w[0, 1]):
        raise DegenerateWindowError("series is constant over the fit window")
    return w


def fit_exponent(series, window) -> FitResult:
    """Least-squares slope of log value against log time over the window.

    Points with value <= 0 are dropped and counted in n_excluded. A list of
    series is fitted one by one and pooled.
    """
    fits = []
    excluded = 0
    for s in _as_series_list(series):
        w = _in_window(s, window)
        pos = w[:, 1] > 0
        excluded += int(np.sum(~pos))
        w = w[pos]
        if len(w) < 3 or w[:, 0].min() <= 0:
            raise DegenerateWindowError("too few positive points for a log-log fit")
        fits.append((_linfit(np.log(w[:, 0]), np.log(w[:, 1])), len(w)))
    return _pool([(f[0], f[1], f[2], f[3], f[4]) for f, _ in fits], [n for _, n in fits], window, excluded, power=True)


def fit_speed(series, window) -> FitResult:
    """Least-squares slope of value against time; lists of series are pooled."""
    fits = []
    for s in _as_series_list(series):
        w = _in_window(s, window)
        fits.append((_linfit(w[:, 0], w[:, 1]), len(w)))
    return _pool([f for f, _ in fits], [n for _, n in fits], window, 0, power=False)


def _pool(fits, npts, window, excluded, power):
    slopes = np.array([f[0] for f in fits])
    icpts = np.array([f[1] for f in fits])
    r2 = float(np.mean([f[4] for f in fits]))
    n = len(fits)
    if n == 1:
        se_slope, se_icpt = fits[0][2], fits[0][3]
    else:
        se_slope = slopes.std(ddof=1) / np.sqrt(n)
        se_icpt = icpts.std(ddof=1) / np.sqrt(n)
    slope = float(slopes.mean())
    window = (float(window[0]), float(window[1]))
    if power:
        pref = float(np.exp(icpts.mean()))
        return FitResult(slope, float(se_slope), pref, float(pref * se_icpt), window, r2, int(sum(npts)), excluded, n)
    return FitResult(float("nan"), float("nan"), slope, float(se_slope), window, r2, int(sum(npts)), excluded, n)

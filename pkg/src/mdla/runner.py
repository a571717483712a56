"""Replica orchestration, fits and output files for experiments."""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import DEFAULT_ALPHA, RunRecord, SimConfig, detect_regenerations, simulate_1d
from .fitting import DegenerateWindowError, FitResult, fit_exponent, fit_speed, front_series, sample_times
from .front import FrontPath
from .highdim import simulate_d
from .rng import replica_seed

MODES = ("run", "sweep", "validate", "analyze")


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "run"
    k_values: tuple = (1.0,)
    dimension: int = 1
    horizon: float = 1000.0
    replicas: int = 1
    master_seed: int = 0
    leakage_tol: float = 1e-3
    output_path: str | None = None
    record_particles: bool = False
    fit_window: tuple | None = None
    alpha: float = DEFAULT_ALPHA
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        object.__setattr__(self, "k_values", tuple(float(k) for k in self.k_values))

    @property
    def window(self) -> tuple:
        """Fit window; defaults to the second half of the horizon."""
        return tuple(self.fit_window) if self.fit_window else (self.horizon / 2.0, self.horizon)


def k_key(k: float) -> int:
    """Seed-derivation key of a density: its IEEE-754 bit pattern."""
    return int(np.float64(k).view(np.uint64))


def sim_config(cfg: ExperimentConfig, k: float, replica: int) -> SimConfig:
    return SimConfig(
        k_density=float(k),
        horizon=float(cfg.horizon),
        master_seed=replica_seed(cfg.master_seed, k_key(k), replica),
        leakage_tol=cfg.leakage_tol,
        record_particles=cfg.record_particles,
        dimension=cfg.dimension,
    )


@dataclass
class ReplicaResult:
    k: float
    replica: int
    record: RunRecord
    regenerations: np.ndarray | None = None


def run_replica(cfg: ExperimentConfig, k: float, replica: int) -> ReplicaResult:
    sc = sim_config(cfg, k, replica)
    rec = simulate_1d(sc) if sc.dimension == 1 else simulate_d(sc)
    regen = None
    if sc.record_particles and sc.dimension == 1:
        regen = detect_regenerations(rec, cfg.alpha)
    # particle tables are large and not needed once reduced
    if rec.particle_history is not None:
        rec = _strip_particles(rec)
    return ReplicaResult(float(k), replica, rec, regen)


def _strip_particles(rec):
    fields = {f: getattr(rec, f) for f in rec.__dataclass_fields__}
    fields["particle_history"] = None
    return type(rec)(**fields)


def _run_one(args):
    cfg, k, r = args
    return run_replica(cfg, k, r)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    replicas: dict = field(default_factory=dict)  # k -> list of ReplicaResult
    fits: dict = field(default_factory=dict)  # k -> {"speed": FitResult, "exponent": FitResult}
    wall_clock: float = 0.0


def fit_fronts(paths, window, n: int = 200) -> dict:
    """Pooled speed and exponent fits of front paths over the window."""
    out = {}
    lin = [front_series(p, sample_times(window, n)) for p in paths]
    log = [front_series(p, sample_times(window, n, log=True)) for p in paths]
    for name, fn, series in (("speed", fit_speed, lin), ("exponent", fit_exponent, log)):
        try:
            out[name] = fn(series, window)
        except DegenerateWindowError as err:
            out[name] = str(err)
    return out


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every (K, replica) pair; results are reduced in a fixed order."""
    t0 = time.perf_counter()
    jobs = [(cfg, k, r) for k in cfg.k_values for r in range(cfg.replicas)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            done = list(pool.map(_run_one, jobs))
    else:
        done = [_run_one(j) for j in jobs]
    res = ExperimentResult(cfg)
    for rr in done:
        res.replicas.setdefault(rr.k, []).append(rr)
    for k, lst in res.replicas.items():
        res.fits[k] = fit_fronts([rr.record.front for rr in lst], cfg.window)
    res.wall_clock = time.perf_counter() - t0
    return res


# ------------------------------------------------------------------ output


def fmt(x) -> str:
    """Round-trip formatting of numbers (17 significant digits for floats)."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def k_label(k: float) -> str:
    return format(float(k), ".17g")


def trajectory_rows(lst) -> list:
    rows = ["replica_id,event_index,time,front_position"]
    for rr in lst:
        f = rr.record.front
        for i, (t, x) in enumerate(zip(f.jump_times, f.positions)):
            rows.append(f"{rr.replica},{i},{fmt(t)},{int(x)}")
    return rows


def diameter_rows(lst) -> list:
    rows = ["replica_id,time,diameter,front_position"]
    for rr in lst:
        for t, dm, x in rr.record.diameter_series:
            rows.append(f"{rr.replica},{fmt(t)},{int(dm)},{int(x)}")
    return rows


def _fit_lines(prefix, fit):
    if isinstance(fit, str):
        return [f"{prefix}.error = {fit}"]
    return [f"{prefix}.{k} = {fmt(v) if not isinstance(v, tuple) else ' '.join(fmt(u) for u in v)}" for k, v in asdict(fit).items()]


def summary_lines(res: ExperimentResult) -> list:
    cfg = res.config
    lines = ["[config]"]
    for k, v in asdict(cfg).items():
        v = " ".join(fmt(u) for u in v) if isinstance(v, tuple) else fmt(v)
        lines.append(f"{k} = {v}")
    for k, lst in res.replicas.items():
        lines.append("")
        lines.append(f"[k={k_label(k)}]")
        for rr in lst:
            rec = rr.record
            p = f"replica.{rr.replica}"
            lines.append(f"{p}.seed = {rec.config.master_seed}")
            lines.append(f"{p}.final_front = {int(rec.front.value(rec.front.horizon))}")
            lines.append(f"{p}.event_count = {rec.event_count}")
            lines.append(f"{p}.leakage_bound = {fmt(rec.leakage_bound)}")
            if rr.regenerations is not None:
                lines.append(f"{p}.regenerations = {len(rr.regenerations)}")
        for name, fit in res.fits.get(k, {}).items():
            lines.extend(_fit_lines(f"fit.{name}", fit))
    lines.append("")
    lines.append(f"wall_clock_seconds = {res.wall_clock:.3f}")
    return lines


def write_outputs(res: ExperimentResult, out_dir) -> list:
    """Write per-K trajectory (and diameter) files plus summary.txt; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for k, lst in res.replicas.items():
        p = out / f"front_k={k_label(k)}.csv"
        p.write_text("\n".join(trajectory_rows(lst)) + "\n")
        written.append(p)
        if res.config.dimension > 1:
            p = out / f"diameter_k={k_label(k)}.csv"
            p.write_text("\n".join(diameter_rows(lst)) + "\n")
            written.append(p)
    p = out / "summary.txt"
    p.write_text("\n".join(summary_lines(res)) + "\n")
    written.append(p)
    return written


def read_trajectories(path, horizon: float | None = None, replicas: int | None = None) -> dict:
    """replica_id -> FrontPath from a trajectory file.

    Replicas whose front never moved have no rows; pass ``replicas`` to
    restore them as empty paths.
    """
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0 and horizon is None:
        raise ValueError("empty trajectory file needs an explicit horizon")
    h = float(horizon) if horizon is not None else float(data[:, 2].max())
    out = {}
    ids = set(range(replicas)) if replicas else set()
    ids |= set(np.unique(data[:, 0]).astype(int).tolist()) if data.size else set()
    for rid in sorted(ids):
        rows = data[data[:, 0] == rid] if data.size else np.zeros((0, 4))
        out[rid] = FrontPath(rows[:, 2], rows[:, 3].astype(np.int64), h)
    return out

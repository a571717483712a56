"""Command-line driver: run, sweep, validate and analyze."""

import argparse
import sys
from pathlib import Path

from .core import DEFAULT_ALPHA
from .fitting import DegenerateWindowError
from .runner import ExperimentConfig, _fit_lines, fit_fronts, read_trajectories, run_experiment, summary_lines, write_outputs
from .validation import CHECKS, DEFAULT_SEED, run_validation, validation_table

DEFAULTS = {
    "k": [1.0],
    "dim": 1,
    "horizon": 1000.0,
    "replicas": 1,
    "seed": 0,
    "leakage_tol": 1e-3,
    "out": None,
    "record_particles": False,
    "fit_window": None,
    "alpha": DEFAULT_ALPHA,
    "workers": 1,
}
_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _num_list(text):
    return [float(v) for v in text.replace(",", " ").split()]


_PARSE = {
    "k": _num_list,
    "dim": int,
    "horizon": float,
    "replicas": int,
    "seed": int,
    "leakage_tol": float,
    "out": str,
    "record_particles": lambda v: _BOOL[v.strip().lower()],
    "fit_window": lambda v: tuple(_num_list(v)),
    "alpha": float,
    "workers": int,
}


def read_config_file(path) -> dict:
    """Flat key=value file; keys mirror the long flags ('-' or '_'), '#' starts a comment.

    Repeated k lines accumulate, as does a repeated --k flag.
    """
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _PARSE:
            raise ValueError(f"{path}:{n}: unknown key {key!r}")
        v = _PARSE[key](val)
        if key == "k":
            out.setdefault("k", []).extend(v)
        else:
            out[key] = v
    return out


def _add_common(p):
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--k", type=float, action="append", help="density K (repeatable)")
    p.add_argument("--dim", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--leakage-tol", dest="leakage_tol", type=float)
    p.add_argument("--out")
    p.add_argument("--record-particles", dest="record_particles", action="store_true", default=None)
    p.add_argument("--fit-window", dest="fit_window", type=float, nargs=2, metavar=("T_LO", "T_HI"))
    p.add_argument("--alpha", type=float, help="barrier slope for regeneration detection")
    p.add_argument("--workers", type=int, help="worker processes for replicas")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mdla", description="Multi-particle DLA simulator and analysis toolkit.")
    sub = ap.add_subparsers(dest="mode", required=True)
    _add_common(sub.add_parser("run", help="simulate replicas at one density"))
    _add_common(sub.add_parser("sweep", help="simulate replicas at several densities"))
    v = sub.add_parser("validate", help="run the acceptance checks")
    v.add_argument("--seed", type=int, default=DEFAULT_SEED)
    v.add_argument("--only", help="comma-separated criterion numbers")
    v.add_argument("--out", help="write the pass/fail table here")
    v.add_argument("-v", "--verbose", action="store_true")
    a = sub.add_parser("analyze", help="fit trajectory files")
    a.add_argument("files", nargs="+")
    _add_common(a)
    return ap


def resolve(args) -> dict:
    """Defaults, then the config file, then explicit flags."""
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = tuple(val) if key == "fit_window" else val
    return merged


def _experiment(mode, o) -> ExperimentConfig:
    return ExperimentConfig(
        mode=mode,
        k_values=tuple(o["k"]),
        dimension=o["dim"],
        horizon=o["horizon"],
        replicas=o["replicas"],
        master_seed=o["seed"],
        leakage_tol=o["leakage_tol"],
        output_path=o["out"],
        record_particles=o["record_particles"],
        fit_window=o["fit_window"],
        alpha=o["alpha"],
        workers=o["workers"],
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.mode == "validate":
        only = set(args.only.split(",")) if args.only else None
        if only and not only <= set(CHECKS):
            print(f"unknown criteria: {sorted(only - set(CHECKS))}", file=sys.stderr)
            return 2
        results = run_validation(args.seed, only, args.verbose, stream=sys.stdout)
        if args.out:
            Path(args.out).write_text(validation_table(results))
        return 0 if all(r.passed for r in results) else 1

    o = resolve(args)
    if args.mode == "analyze":
        horizon = o["horizon"] if args.horizon is not None or args.config else None
        for f in args.files:
            paths = list(read_trajectories(f, horizon, args.replicas).values())
            h = paths[0].horizon
            window = o["fit_window"] or (h / 2.0, h)
            print(f"[{f}]")
            print(f"replicas = {len(paths)}")
            try:
                for name, fit in fit_fronts(paths, window).items():
                    print("\n".join(_fit_lines(f"fit.{name}", fit)))
            except DegenerateWindowError as err:
                print(f"fit.error = {err}")
        return 0

    if args.mode == "run" and len(o["k"]) != 1:
        print("run takes exactly one --k; use sweep for several", file=sys.stderr)
        return 2
    cfg = _experiment(args.mode, o)
    res = run_experiment(cfg)
    if cfg.output_path:
        for p in write_outputs(res, cfg.output_path):
            print(p)
    else:
        print("\n".join(summary_lines(res)))
    return 0


if __name__ == "__main__":
    sys.exit(main())

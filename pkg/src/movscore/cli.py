"""Command line entry point: ``movscore <command> [options]``.

Settings resolve in the order built-in default < ``--config`` JSON file <
``MOVSCORE_<NAME>`` environment variable < command-line flag.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from movscore import __version__
from movscore.reports import (
    RunConfig,
    cmd_detect,
    cmd_evaluate,
    cmd_simulate,
    cmd_trend,
    cmd_windows,
    evaluate_text,
    simulation_text,
)

ENV_PREFIX = "MOVSCORE_"

log = logging.getLogger("movscore")


def _split(value: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


def _windows(value) -> tuple[str, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(str(v).upper() for v in value)
    v = str(value).lower()
    return ("OF", "OV", "DV") if v == "all" else tuple(x.upper() for x in _split(v))


def _rules(value) -> tuple[str, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(str(v).upper() for v in value)
    v = str(value).lower()
    return ("SE", "CRPS") if v == "both" else tuple(x.upper() for x in _split(v))


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def _group_by(value) -> tuple[str, ...]:
    if isinstance(value, (list, tuple)):
        out = []
        for v in value:
            out.extend(_split(str(v)))
        return tuple(out)
    return _split(str(value))


# name -> converter for values coming from config files and env vars
SETTINGS = {
    "penalty_p": float,
    "min_seg_len": int,
    "variance_floor": float,
    "windows": _windows,
    "rules": _rules,
    "tie_tol": float,
    "reps": int,
    "seed": int,
    "workers": int,
    "group_by": _group_by,
    "out": Path,
    "figures": _bool,
    "st": _bool,
    "missing": str,
    "time_col": str,
    "obs_col": str,
    "location_col": str,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", type=Path, help="JSON file with default settings")
    g.add_argument("--out", help="output directory (default: movscore-out)")
    g.add_argument("--penalty-p", dest="penalty_p", type=float,
                   help="penalty multiplier p in kappa = p*ln(N) (default 3)")
    g.add_argument("--min-seg-len", dest="min_seg_len", type=int, help="minimum segment length (default 11)")
    g.add_argument("--variance-floor", dest="variance_floor", type=float,
                   help="lower bound on segment variances (default 1e-8)")
    g.add_argument("--windows", help="of|ov|dv|all or a comma list (default all)")
    g.add_argument("--rule", dest="rules", help="se|crps|both (default both)")
    g.add_argument("--tie-tol", dest="tie_tol", type=float, help="rank tie tolerance (default 0.0005)")
    g.add_argument("--no-figures", dest="figures", action="store_const", const=False,
                   help="skip PNG figures")
    g.add_argument("--time-col", dest="time_col", help="time column name (default time)")
    g.add_argument("--obs-col", dest="obs_col", help="observation column name (default obs)")
    g.add_argument("--location-col", dest="location_col", help="location column name (default location)")
    g.add_argument("--missing", help="missing-value sentinel, rejected in used columns (default NA)")
    g.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="movscore", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", parents=[common], help="changepoints of the observation series")
    d.add_argument("input", type=Path)

    w = sub.add_parser("windows", parents=[common], help="moving-window plans from detected changepoints")
    w.add_argument("input", type=Path)

    e = sub.add_parser("evaluate", parents=[common], help="moving, point-wise and ST scores of model columns")
    e.add_argument("input", type=Path)
    e.add_argument("--group-by", dest="group_by", action="append", choices=["month", "year", "location"],
                   help="also report grouped means (repeatable)")
    e.add_argument("--plan", type=Path, help="reuse a window plan CSV written by `windows`")
    e.add_argument("--st", dest="st", action="store_const", const=True, help="include ST scores")

    s = sub.add_parser("simulate", parents=[common], help="replication experiment for a scenario")
    s.add_argument("scenario", help="preset C, T or P, or a JSON scenario file")
    s.add_argument("--reps", type=int, help="number of replications")
    s.add_argument("--seed", type=int, help="random seed (default 1)")
    s.add_argument("--workers", type=int, help="worker processes (default 1)")
    st = s.add_mutually_exclusive_group()
    st.add_argument("--st", dest="st", action="store_const", const=True, help="force ST scores")
    st.add_argument("--no-st", dest="st", action="store_const", const=False, help="suppress ST scores")

    t = sub.add_parser("trend", parents=[common], help="absolute linear-trend errors against a reference")
    t.add_argument("models", nargs="+", type=Path, help="model table(s); every value column is a model")
    t.add_argument("--ref", required=True, type=Path, help="reference table with one value column")
    return p


def resolve_config(args: argparse.Namespace, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    values: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"cannot read config {args.config}: {exc}") from None
        unknown = sorted(set(file_cfg) - set(SETTINGS))
        if unknown:
            raise ValueError(f"unknown setting(s) in {args.config}: {unknown}")
        values.update({k: SETTINGS[k](v) for k, v in file_cfg.items()})
    for name, conv in SETTINGS.items():
        env = environ.get(ENV_PREFIX + name.upper())
        if env is not None:
            values[name] = conv(env)
    for name, conv in SETTINGS.items():
        v = getattr(args, name, None)
        if v is not None:
            values[name] = conv(v)
    return RunConfig(**values)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "detect":
            summary = cmd_detect(args.input, cfg)
            for loc, s in summary.items():
                where = f"{loc}: " if loc else ""
                print(f"{where}{s['m']} changepoint(s) {s['changepoints']} objective {s['objective']:.3f}")
        elif args.command == "windows":
            cmd_windows(args.input, cfg)
            print(f"window plans written to {cfg.out / 'windows.csv'}")
        elif args.command == "evaluate":
            summary = cmd_evaluate(args.input, cfg, plan_path=args.plan)
            print(evaluate_text(summary))
        elif args.command == "simulate":
            res = cmd_simulate(args.scenario, cfg)
            print(simulation_text(res))
            if res.failures:
                print(f"{len(res.failures)} replication(s) failed; see table.json", file=sys.stderr)
        elif args.command == "trend":
            report = cmd_trend(args.models, args.ref, cfg)
            for label, v in report["mean_abs_trend_error"].items():
                print(f"{label}: {v:.3f} ({report['units']})")
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"movscore {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

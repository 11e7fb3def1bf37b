"""Command implementations: read inputs, run the computation, write reports.

Every command writes delimited output (CSV), a JSON summary and, unless
disabled, PNG figures into ``cfg.out``.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from movscore import plotting
from movscore.changepoint import PeltConfig, pelt_detect, segment_stats
from movscore.evaluation import (
    SeriesPair,
    moving_scores,
    pw_scores,
    rank_models,
    st_scores,
)
from movscore.io import (
    InputError,
    format_table,
    format_time,
    plan_frame,
    read_plan_csv,
    read_series_table,
    write_csv,
    write_json,
)
from movscore.simulation import ReplicationResult, ScenarioSpec, preset, run_scenario, spec_from_dict
from movscore.trend import DECADE, annual_means, ols_trend, trend_error_table
from movscore.windows import KINDS, make_plan

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    penalty_p: float = 3.0
    min_seg_len: int = 11
    variance_floor: float = 1e-8
    windows: tuple[str, ...] = KINDS
    rules: tuple[str, ...] = ("SE", "CRPS")
    tie_tol: float = 0.0005
    reps: int | None = None
    seed: int = 1
    workers: int = 1
    group_by: tuple[str, ...] = ()
    out: Path = Path("movscore-out")
    figures: bool = True
    st: bool | None = None
    missing: str = "NA"
    time_col: str = "time"
    obs_col: str = "obs"
    location_col: str = "location"

    def __post_init__(self):
        self.out = Path(self.out)
        self.windows = tuple(k.upper() for k in self.windows)
        self.rules = tuple(r.upper() for r in self.rules)
        bad = [k for k in self.windows if k not in KINDS]
        if bad:
            raise ValueError(f"unknown window kind(s) {bad}")
        bad = [r for r in self.rules if r not in ("SE", "CRPS")]
        if bad:
            raise ValueError(f"unknown rule(s) {bad}")
        bad = [g for g in self.group_by if g not in ("month", "year", "location")]
        if bad:
            raise ValueError(f"unknown grouping key(s) {bad}")

    @property
    def pelt(self) -> PeltConfig:
        return PeltConfig(
            min_seg_len=self.min_seg_len, variance_floor=self.variance_floor, penalty_p=self.penalty_p
        )

    def as_dict(self) -> dict:
        d = asdict(self)
        d["out"] = str(self.out)
        return d


def _read(path, cfg: RunConfig, **kw):
    return read_series_table(
        path, time_col=cfg.time_col, obs_col=kw.pop("obs_col", cfg.obs_col),
        location_col=cfg.location_col, missing=cfg.missing, **kw,
    )


# -- detect --------------------------------------------------------------------


def cmd_detect(path, cfg: RunConfig) -> dict:
    table = _read(path, cfg, require_models=False)
    pcfg = cfg.pelt
    cp_rows, seg_rows, summary = [], [], {}
    for loc, part in table.groups():
        y = part[table.obs_col].to_numpy()
        times = format_time(part[table.time_col])
        seg = pelt_detect(y, pcfg)
        stats = segment_stats(y, seg, pcfg)
        for j, tau in enumerate(seg.changepoints, start=1):
            cp_rows.append({"location": loc, "j": j, "tau": tau, "time": times[tau - 1]})
        for j, ((a, b), st) in enumerate(zip(seg.segments(), stats)):
            seg_rows.append({
                "location": loc, "segment": j, "start": a, "end": b,
                "start_time": times[a - 1], "end_time": times[b - 1],
                "mean": st.mean, "sd": st.sd, "length": st.length,
            })
        summary[loc] = {
            "n": seg.n, "m": seg.m, "changepoints": list(seg.changepoints),
            "objective": seg.objective, "kappa": pcfg.kappa(seg.n),
        }
    cols_cp = ["location", "j", "tau", "time"]
    write_csv(pd.DataFrame(cp_rows, columns=cols_cp), cfg.out / "changepoints.csv")
    write_csv(pd.DataFrame(seg_rows), cfg.out / "segments.csv")
    write_json({"config": cfg.as_dict(), "locations": summary}, cfg.out / "detect.json")
    return summary


# -- windows -------------------------------------------------------------------


def _plans_for(table, cfg: RunConfig) -> dict:
    plans = {}
    for loc, part in table.groups():
        seg = pelt_detect(part[table.obs_col].to_numpy(), cfg.pelt)
        plans[loc] = {k: make_plan(seg, k) for k in cfg.windows}
    return plans


def cmd_windows(path, cfg: RunConfig) -> dict:
    table = _read(path, cfg, require_models=False)
    plans = _plans_for(table, cfg)
    write_csv(plan_frame(plans), cfg.out / "windows.csv")
    if cfg.figures:
        series = {k: {loc: p[k].widths for loc, p in list(plans.items())[:10]} for k in cfg.windows}
        plotting.score_panels(series, cfg.windows, cfg.out / "figures" / "window_widths.png",
                              ylabel="window width", shared_y=False)
    return plans


# -- evaluate ------------------------------------------------------------------


def _nested(df: pd.DataFrame, value: str, keys: Sequence[str]):
    out: dict = {}
    for row in df.itertuples(index=False):
        d = out
        for k in keys[:-1]:
            d = d.setdefault(str(getattr(row, k)), {})
        d[str(getattr(row, keys[-1]))] = getattr(row, value)
    return out


def cmd_evaluate(path, cfg: RunConfig, plan_path=None) -> dict:
    table = _read(path, cfg)
    if "month" in cfg.group_by or "year" in cfg.group_by:
        if not table.dated:
            raise InputError("--group-by month/year needs ISO dates in the time column")
    if plan_path is not None:
        plans = read_plan_csv(plan_path)
        missing = [loc for loc, _ in table.groups() if loc not in plans]
        if missing:
            raise InputError(f"window plan has no entry for location(s) {missing[:5]}")
    else:
        plans = _plans_for(table, cfg)

    methods = list(cfg.windows) + ["PW"] + (["ST"] if cfg.st else [])
    parts = []
    for loc, part in table.groups():
        y = part[table.obs_col].to_numpy()
        times = part[table.time_col].to_numpy()
        n = y.size
        for model in table.model_cols:
            pair = SeriesPair(y, part[model].to_numpy(), model)
            for rule in cfg.rules:
                for method in methods:
                    if method == "PW":
                        s = pw_scores(pair, rule)
                    elif method == "ST":
                        s = st_scores(pair, rule)
                    else:
                        try:
                            plan = plans[loc][method]
                        except KeyError:
                            raise InputError(f"window plan lacks {method} windows for {loc!r}") from None
                        s = moving_scores(pair, plan, rule)
                    parts.append(pd.DataFrame({
                        "location": loc, "t": np.arange(1, n + 1), "time": times,
                        "model": model, "method": method, "rule": rule, "score": s.values,
                    }))
    scores = pd.concat(parts, ignore_index=True)
    out_scores = scores.assign(time=format_time(scores["time"]))
    write_csv(out_scores, cfg.out / "scores.csv")

    keys = ["rule", "method", "model"]
    avg = scores.groupby(keys, sort=False)["score"].mean().reset_index()
    averages = _nested(avg, "score", keys)
    ranks = {
        rule: {m: rank_models(v, cfg.tie_tol) for m, v in by_m.items()}
        for rule, by_m in averages.items()
    }
    grouped = {}
    for g in cfg.group_by:
        if g == "location":
            key = scores["location"]
        elif g == "month":
            key = scores["time"].dt.strftime("%Y-%m")
        else:
            key = scores["time"].dt.year.astype(str)
        gdf = scores.assign(group=key).groupby(["group"] + keys, sort=True)["score"].mean().reset_index()
        write_csv(gdf, cfg.out / f"grouped_{g}.csv")
        grouped[g] = _nested(gdf, "score", keys + ["group"])
        if cfg.figures and g != "location":
            for rule in cfg.rules:
                series = {
                    m: {mod: np.asarray(list(grouped[g][rule][m][mod].values())) for mod in table.model_cols}
                    for m in methods
                }
                plotting.score_panels(series, methods, cfg.out / "figures" / f"evaluate_{rule}_by_{g}.png",
                                      ylabel=f"mean {rule}", title=f"{rule} averaged by {g}")
    summary = {
        "config": cfg.as_dict(),
        "input": table.source,
        "n_locations": len(table.locations()),
        "n_times": n,
        "methods": methods,
        "averages": averages,
        "ranks": ranks,
        "grouped": grouped,
    }
    write_json(summary, cfg.out / "summary.json")
    if cfg.figures:
        for rule in cfg.rules:
            plotting.bar_averages(averages[rule], cfg.out / "figures" / f"evaluate_{rule}_averages.png",
                                  ylabel=f"average {rule}")
    return summary


def evaluate_text(summary: dict) -> str:
    chunks = []
    for rule, by_m in summary["averages"].items():
        models = list(next(iter(by_m.values())))
        rows = {}
        for model in models:
            row: dict = {}
            for m in by_m:
                row[f"avg_{m}"] = by_m[m][model]
            for m in by_m:
                row[f"rank_{m}"] = summary["ranks"][rule][m][model]
            rows[model] = row
        chunks.append(f"[{rule}]\n" + format_table(rows, list(next(iter(rows.values())))))
    return "\n\n".join(chunks)


# -- simulate ------------------------------------------------------------------


def load_scenario(name_or_config: str, cfg: RunConfig) -> ScenarioSpec:
    """Preset name ``C``/``T``/``P`` or a JSON scenario file."""
    p = Path(name_or_config)
    if name_or_config.upper() in ("C", "T", "P") and not p.is_file():
        spec = preset(name_or_config, replications=cfg.reps, seed=cfg.seed)
    elif p.is_file():
        import json

        with open(p, encoding="utf-8") as fh:
            spec = spec_from_dict(json.load(fh))
        changes = {}
        if cfg.reps is not None:
            changes["replications"] = cfg.reps
        changes["seed"] = cfg.seed
        spec = spec.with_(**changes)
    else:
        raise ValueError(f"unknown scenario {name_or_config!r}: expected C, T, P or a JSON file")
    if cfg.st is not None:
        spec = spec.with_(include_st=cfg.st)
    return spec


def simulation_table(res: ReplicationResult) -> dict:
    cps, cp_counts = np.unique(res.n_changepoints, return_counts=True)
    ws, w_counts = np.unique(res.of_widths, return_counts=True)
    return {
        "scenario": res.spec.kind,
        "n": res.spec.n,
        "replications": res.spec.replications,
        "completed": res.completed,
        "failed": len(res.failures),
        "failures": [{"replication": r, "error": e} for r, e in res.failures[:20]],
        "seed": res.spec.seed,
        "methods": list(res.methods),
        "models": res.model_labels,
        "changepoint_counts": {str(k): int(v) for k, v in zip(cps, cp_counts)},
        "of_widths": {str(k): int(v) for k, v in zip(ws, w_counts)},
        "tables": {rule: res.table(rule) for rule in res.rules},
    }


def simulation_text(res: ReplicationResult) -> str:
    chunks = []
    for rule in res.rules:
        tab = res.table(rule)
        cols = list(next(iter(tab.values())))
        chunks.append(f"[{rule}]\n" + format_table(tab, cols))
    return "\n\n".join(chunks)


def cmd_simulate(name_or_config: str, cfg: RunConfig, progress=None) -> ReplicationResult:
    spec = load_scenario(name_or_config, cfg)
    res = run_scenario(spec, rules=cfg.rules, pelt_cfg=cfg.pelt, workers=cfg.workers,
                       tie_tol=cfg.tie_tol, progress=progress)
    rows = []
    t = np.arange(1, spec.n + 1)
    for (model, method, rule), vals in res.series.items():
        rows.append(pd.DataFrame({"t": t, "model": model, "method": method, "rule": rule, "score": vals}))
    write_csv(pd.concat(rows, ignore_index=True), cfg.out / "series.csv")
    table = simulation_table(res)
    table["config"] = cfg.as_dict()
    write_json(table, cfg.out / "table.json")
    (cfg.out / "table.txt").write_text(simulation_text(res) + "\n", encoding="utf-8")
    if cfg.figures:
        for rule in res.rules:
            series = {m: {lab: res.series[(lab, m, rule)] for lab in res.model_labels} for m in res.methods}
            plotting.score_panels(series, res.methods, cfg.out / "figures" / f"simulate_{spec.kind}_{rule}.png",
                                  ylabel=rule, title=f"scenario {spec.kind}: replication-averaged {rule}")
    return res


# -- trend ---------------------------------------------------------------------


def _slopes(path, cfg: RunConfig) -> dict[str, dict[str, float]]:
    """``{column: {location: slope per year}}`` for each value column."""
    table = read_series_table(path, time_col=cfg.time_col, obs_col=None,
                              location_col=cfg.location_col, missing=cfg.missing)
    out: dict[str, dict[str, float]] = {c: {} for c in table.model_cols}
    for loc, part in table.groups():
        tcol = part[table.time_col]
        years = tcol.dt.year.to_numpy() if table.dated else tcol.to_numpy()
        for c in table.model_cols:
            fit = ols_trend(annual_means(part[c].to_numpy(), years))
            out[c][loc] = fit.slope
    return out


def cmd_trend(model_paths: Sequence, ref_path, cfg: RunConfig) -> dict:
    ref = _slopes(ref_path, cfg)
    if len(ref) != 1:
        raise InputError(f"{ref_path}: reference table must have exactly one value column, got {list(ref)}")
    ref_slopes = next(iter(ref.values()))
    rows, means = [], {}
    for path in model_paths:
        for label, slopes in _slopes(path, cfg).items():
            if label in means:
                raise InputError(f"duplicate model column {label!r}")
            errors, mean = trend_error_table(slopes, ref_slopes)
            means[label] = mean * DECADE
            for loc, err in errors.items():
                rows.append({
                    "location": loc, "model": label, "slope_model": slopes[loc] * DECADE,
                    "slope_ref": ref_slopes[loc] * DECADE, "abs_error": err * DECADE,
                })
    write_csv(pd.DataFrame(rows), cfg.out / "trend.csv")
    report = {
        "units": "per decade",
        "n_locations": len(ref_slopes),
        "mean_abs_trend_error": means,
        "ranks": rank_models(means, cfg.tie_tol),
        "config": cfg.as_dict(),
    }
    write_json(report, cfg.out / "trend.json")
    if cfg.figures:
        plotting.bar_averages({"trend": means}, cfg.out / "figures" / "trend_errors.png",
                              ylabel="mean |decadal trend error|")
    return report

"""Replication experiments on Gaussian scenarios with known distributions.

Three scenario families are built in: piecewise-constant changepoint (C),
exponential trend (T) and sinusoidal periodicity (P). Each has a data
generating process and five competing models, all Gaussian per time step.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from movscore.changepoint import PeltConfig, pelt_detect
from movscore.evaluation import (
    SeriesPair,
    moving_scores,
    pw_scores,
    rank_models,
    st_scores,
    theoretical_scores_array,
)
from movscore.windows import make_plan, of_half_width

KINDS = ("C", "T", "P")
MOVING = ("OF", "OV", "DV")
# replications per reduction block; fixed so results do not depend on worker count
BLOCK = 25


@dataclass(frozen=True)
class Param:
    """Mean and sd parameter vectors of one process (DGP or model)."""

    label: str
    mu: tuple[float, ...]
    sigma: tuple[float, ...]


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    n: int
    dgp: Param
    models: tuple[Param, ...]
    replications: int = 2000
    seed: int = 1
    changepoints: tuple[int, ...] = ()
    include_st: bool | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}; expected C, T or P")
        if self.n < 2:
            raise ValueError("series length must be at least 2")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if not self.models:
            raise ValueError("scenario needs at least one model")
        labels = [m.label for m in self.models]
        if len(set(labels)) != len(labels) or self.dgp.label in labels:
            raise ValueError("model labels must be unique and differ from the DGP label")
        width = len(self.changepoints) + 1 if kind == "C" else 3
        for p in (self.dgp, *self.models):
            if len(p.mu) != width or len(p.sigma) != width:
                raise ValueError(f"{p.label}: expected {width} mean and sd parameters")
        if kind == "C":
            prev = 0
            for c in self.changepoints:
                if not prev < c < self.n:
                    raise ValueError("scenario changepoints must be increasing inside 1..n-1")
                prev = c

    @property
    def st_enabled(self) -> bool:
        if self.include_st is not None:
            return self.include_st
        return self.kind in ("C", "T")

    def process(self, who: str | int) -> Param:
        """``"dgp"`` / ``0`` for the DGP, a model label or 1-based model index."""
        if who in ("dgp", 0, self.dgp.label):
            return self.dgp
        if isinstance(who, int):
            return self.models[who - 1]
        for m in self.models:
            if m.label == who:
                return m
        raise KeyError(who)

    def with_(self, **changes) -> "ScenarioSpec":
        from dataclasses import replace

        return replace(self, **changes)


def h_trend(t, theta):
    return theta[0] + theta[1] * t * np.exp(theta[2] * t)


def h_periodic(t, theta):
    return theta[0] + theta[1] * np.sin(2.0 * math.pi * t * theta[2])


def mean_sd_arrays(spec: ScenarioSpec, who) -> tuple[np.ndarray, np.ndarray]:
    """Mean and sd of the process at t = 1..n."""
    p = spec.process(who)
    t = np.arange(1, spec.n + 1, dtype=float)
    if spec.kind == "C":
        lengths = np.diff((0,) + spec.changepoints + (spec.n,))
        mean = np.repeat(np.asarray(p.mu, dtype=float), lengths)
        sd = np.repeat(np.asarray(p.sigma, dtype=float), lengths)
    elif spec.kind == "T":
        mean = h_trend(t, p.mu)
        sd = h_trend(t, p.sigma)
    else:
        mean = h_periodic(t, p.mu)
        sd = np.exp(h_periodic(t, p.sigma))
    return mean, sd


def scenario_mean_sd(spec: ScenarioSpec, who, t: int) -> tuple[float, float]:
    if not 1 <= t <= spec.n:
        raise ValueError(f"t={t} outside 1..{spec.n}")
    mean, sd = mean_sd_arrays(spec, who)
    return float(mean[t - 1]), float(sd[t - 1])


def replication_rng(seed: int, replication: int, stream: int) -> np.random.Generator:
    """Independent generator for one (replication, process) pair."""
    ss = np.random.SeedSequence(seed, spawn_key=(replication, stream))
    return np.random.Generator(np.random.Philox(ss))


def generate_series(spec: ScenarioSpec, who, rng: np.random.Generator) -> np.ndarray:
    mean, sd = mean_sd_arrays(spec, who)
    if np.any(sd < 0):
        raise ValueError("standard deviations must be nonnegative")
    return mean + sd * rng.standard_normal(spec.n)


# -- presets ---------------------------------------------------------------


def scenario_c(replications: int = 2000, seed: int = 1) -> ScenarioSpec:
    mu0, s0 = (0.0, 1.0, 0.0), (0.9, 0.9, 0.3)
    mu2, s3 = (0.25, 0.25, 0.25), (0.6, 0.6, 0.6)
    return ScenarioSpec(
        kind="C",
        n=200,
        changepoints=(80, 130),
        dgp=Param("C0", mu0, s0),
        models=(
            Param("C1", mu0, s0),
            Param("C2", mu2, s0),
            Param("C3", mu0, s3),
            Param("C4", mu2, s3),
            Param("C5", (0.1, 0.9, 0.1), s3),
        ),
        replications=replications,
        seed=seed,
    )


def scenario_t(replications: int = 2000, seed: int = 1) -> ScenarioSpec:
    n = 200

    def v(*a):
        return tuple(x / n for x in a)

    mu0, s0 = v(0, 1 / 3, 2), v(20, 0.05, 2)
    mu2 = v(0, 1 / 3, 1.9)
    return ScenarioSpec(
        kind="T",
        n=n,
        dgp=Param("T0", mu0, s0),
        models=(
            Param("T1", mu0, s0),
            Param("T2", mu2, s0),
            Param("T3", mu0, v(20, 0.0375, 1.5)),
            Param("T4", mu2, v(20, 0.05, 0)),
            Param("T5", mu2, v(20, 0, 0)),
        ),
        replications=replications,
        seed=seed,
    )


def scenario_p(replications: int = 1000, seed: int = 1) -> ScenarioSpec:
    f = 1 / 365
    mu0, s0 = (0.0, 10.0, f), (0.0, -0.5, f)
    mu2, s3 = (0.0, 9.5, f), (0.0, -0.25, f)
    return ScenarioSpec(
        kind="P",
        n=730,
        dgp=Param("P0", mu0, s0),
        models=(
            Param("P1", mu0, s0),
            Param("P2", mu2, s0),
            Param("P3", mu0, s3),
            Param("P4", mu2, s3),
            Param("P5", mu2, (0.0, 0.0, f)),
        ),
        replications=replications,
        seed=seed,
    )


PRESETS: dict[str, Callable[..., ScenarioSpec]] = {"C": scenario_c, "T": scenario_t, "P": scenario_p}


def preset(name: str, **kwargs) -> ScenarioSpec:
    try:
        factory = PRESETS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown scenario preset {name!r}; expected one of C, T, P") from None
    return factory(**{k: v for k, v in kwargs.items() if v is not None})


def spec_from_dict(d: dict) -> ScenarioSpec:
    """Build a scenario from a declarative mapping (e.g. parsed JSON)."""

    def param(p):
        return Param(str(p["label"]), tuple(map(float, p["mu"])), tuple(map(float, p["sigma"])))

    return ScenarioSpec(
        kind=d["kind"],
        n=int(d["n"]),
        dgp=param(d["dgp"]),
        models=tuple(param(p) for p in d["models"]),
        replications=int(d.get("replications", 2000)),
        seed=int(d.get("seed", 1)),
        changepoints=tuple(int(c) for c in d.get("changepoints", ())),
        include_st=d.get("include_st"),
    )


# -- replication experiment --------------------------------------------------


@dataclass
class ReplicationResult:
    """Replication-averaged score series, scalar averages and ranks.

    Keys of ``series``/``averages`` are ``(model, method, rule)``; keys of
    ``ranks`` are ``(method, rule)``.
    """

    spec: ScenarioSpec
    methods: tuple[str, ...]
    rules: tuple[str, ...]
    series: dict[tuple[str, str, str], np.ndarray]
    averages: dict[tuple[str, str, str], float]
    ranks: dict[tuple[str, str], dict[str, int]]
    n_changepoints: np.ndarray
    of_widths: np.ndarray
    completed: int
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def model_labels(self) -> list[str]:
        return [m.label for m in self.spec.models]

    def table(self, rule: str) -> dict[str, dict[str, float | int]]:
        """Rows = models; ``avg_<METHOD>`` and ``rank_<METHOD>`` columns."""
        out = {}
        for label in self.model_labels:
            row: dict[str, float | int] = {}
            for method in self.methods:
                row[f"avg_{method}"] = self.averages[(label, method, rule)]
            for method in self.methods:
                row[f"rank_{method}"] = self.ranks[(method, rule)][label]
            out[label] = row
        return out


def _methods_for(spec: ScenarioSpec) -> tuple[str, ...]:
    base = ("THEO",) + MOVING + ("PW",)
    return base + ("ST",) if spec.st_enabled else base


def _one_replication(spec, rep, methods, rules, pelt_cfg, model_params):
    y = generate_series(spec, "dgp", replication_rng(spec.seed, rep, 0))
    seg = pelt_detect(y, pelt_cfg)
    plans = {k: make_plan(seg, k) for k in MOVING if k in methods}
    out = {}
    for k, (label, mean, sd) in enumerate(model_params, start=1):
        x = generate_series(spec, label, replication_rng(spec.seed, rep, k))
        pair = SeriesPair(y, x, label)
        for rule in rules:
            for method in methods:
                if method == "THEO":
                    s = theoretical_scores_array(mean, sd, y, rule, label)
                elif method == "PW":
                    s = pw_scores(pair, rule)
                elif method == "ST":
                    s = st_scores(pair, rule)
                else:
                    s = moving_scores(pair, plans[method], rule)
                out[(label, method, rule)] = s.values
    return out, seg.m, 2 * of_half_width(seg) + 1


def _run_block(spec, reps, methods, rules, pelt_cfg):
    model_params = []
    for m in spec.models:
        mean, sd = mean_sd_arrays(spec, m.label)
        if np.any(sd <= 0):
            raise ValueError(f"{m.label}: sd must be positive for theoretical scores")
        model_params.append((m.label, mean, sd))
    sums: dict = {}
    ms, widths, failures, done = [], [], [], 0
    for rep in reps:
        try:
            scores, m, w = _one_replication(spec, rep, methods, rules, pelt_cfg, model_params)
        except (ValueError, FloatingPointError) as exc:
            failures.append((rep, str(exc)))
            continue
        for key, vals in scores.items():
            if key in sums:
                sums[key] += vals
            else:
                sums[key] = vals.copy()
        ms.append(m)
        widths.append(w)
        done += 1
    return sums, ms, widths, failures, done


def run_scenario(
    spec: ScenarioSpec,
    *,
    rules: Sequence[str] = ("SE", "CRPS"),
    pelt_cfg: PeltConfig | None = None,
    workers: int = 1,
    tie_tol: float = 0.0005,
    progress: Callable[[int, int], None] | None = None,
    start: int = 0,
) -> ReplicationResult:
    """Run all replications of ``spec`` and average the score series.

    Replications are numbered ``start .. start + spec.replications - 1``;
    each number keys its own random streams, so disjoint ranges can be run
    separately and pooled.
    """
    pelt_cfg = pelt_cfg or PeltConfig()
    rules = tuple(r.upper() for r in rules)
    methods = _methods_for(spec)
    stop = start + spec.replications
    blocks = [range(b, min(b + BLOCK, stop)) for b in range(start, stop, BLOCK)]
    args = [(spec, blk, methods, rules, pelt_cfg) for blk in blocks]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results: Iterable = pool.map(_run_block, *zip(*args))
            results = list(results)
    else:
        results = []
        for i, a in enumerate(args):
            results.append(_run_block(*a))
            if progress:
                progress(blocks[i].stop - start, spec.replications)

    totals: dict = {}
    ms, widths, failures, done = [], [], [], 0
    for sums, bm, bw, bf, bd in results:
        for key, vals in sums.items():
            if key in totals:
                totals[key] = totals[key] + vals
            else:
                totals[key] = vals.copy()
        ms += bm
        widths += bw
        failures += bf
        done += bd
    if done == 0:
        raise RuntimeError(f"all {spec.replications} replications failed; first error: {failures[0][1]}")

    series = {k: v / done for k, v in totals.items()}
    averages = {k: float(v.mean()) for k, v in series.items()}
    ranks = {}
    for method in methods:
        for rule in rules:
            ranks[(method, rule)] = rank_models(
                {m.label: averages[(m.label, method, rule)] for m in spec.models}, tie_tol
            )
    return ReplicationResult(
        spec=spec,
        methods=methods,
        rules=rules,
        series=series,
        averages=averages,
        ranks=ranks,
        n_changepoints=np.asarray(ms),
        of_widths=np.asarray(widths),
        completed=done,
        failures=failures,
    )

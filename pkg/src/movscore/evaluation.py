"""Score series for (model, observation) pairs and model ranking.

Moving scores compare the model sub-sample inside each window with the
observation at the window location. Window plans come from the observations
only and are passed in, so every model is scored on the same windows.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from movscore.scoring import GaussianSpec, crps_gaussian_array
from movscore.windows import WindowPlan

RULES = ("SE", "CRPS")
METHODS = ("THEO", "OF", "OV", "DV", "PW", "ST")

# keeps the padded window matrix of one chunk at a few MB
_CHUNK_CELLS = 1 << 20


@dataclass(frozen=True, eq=False)
class SeriesPair:
    obs: np.ndarray
    model: np.ndarray
    label: str = "model"

    def __post_init__(self):
        obs = np.asarray(self.obs, dtype=float)
        model = np.asarray(self.model, dtype=float)
        if obs.ndim != 1 or model.shape != obs.shape:
            raise ValueError(
                f"observation and model series must be 1-D of equal length, got {obs.shape} and {model.shape}"
            )
        if not (np.all(np.isfinite(obs)) and np.all(np.isfinite(model))):
            raise ValueError(f"series for {self.label!r} contain non-finite values")
        object.__setattr__(self, "obs", obs)
        object.__setattr__(self, "model", model)

    @property
    def n(self) -> int:
        return self.obs.size


@dataclass(frozen=True, eq=False)
class ScoreSeries:
    method: str
    rule: str
    values: np.ndarray
    label: str = "model"

    def mean(self) -> float:
        return average_score(self)


def _check_rule(rule: str) -> str:
    rule = rule.upper()
    if rule not in RULES:
        raise ValueError(f"unknown scoring rule {rule!r}; expected SE or CRPS")
    return rule


def window_se(x: np.ndarray, y: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """SE of the window means ``x[lo..hi]`` (1-based inclusive) against ``y``."""
    cs = np.concatenate(([0.0], np.cumsum(x)))
    means = (cs[hi] - cs[lo - 1]) / (hi - lo + 1)
    return (means - y) ** 2


def window_crps(x: np.ndarray, y: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Sample CRPS of each window ``x[lo..hi]`` against ``y``, batched.

    Same sorted-rank formula as :func:`movscore.scoring.sample_crps_fast`,
    applied to a padded (rows x max width) matrix in row chunks.
    """
    n = y.size
    width = hi - lo + 1
    out = np.empty(n)
    wmax = int(width.max())
    step = max(1, _CHUNK_CELLS // wmax)
    cols = np.arange(wmax)
    for start in range(0, n, step):
        sl = slice(start, min(n, start + step))
        w = width[sl]
        wm = int(w.max())
        c = cols[:wm]
        mask = c < w[:, None]
        idx = np.where(mask, lo[sl, None] - 1 + c, 0)
        win = x[idx]
        absdev = np.where(mask, np.abs(win - y[sl, None]), 0.0).sum(axis=1) / w
        srt = np.sort(np.where(mask, win, np.inf), axis=1)
        coef = 2.0 * (c + 1) - 1.0 - w[:, None]
        pair = np.where(mask, coef * np.where(mask, srt, 0.0), 0.0).sum(axis=1) / (w * w)
        out[sl] = absdev - pair
    return np.maximum(out, 0.0)


def moving_scores(pair: SeriesPair, plan: WindowPlan, rule: str) -> ScoreSeries:
    """Score of the model sub-sample in ``W(t)`` against ``y_t`` for every t."""
    rule = _check_rule(rule)
    if plan.n != pair.n:
        raise ValueError(f"window plan covers {plan.n} time instances, series have {pair.n}")
    fn = window_se if rule == "SE" else window_crps
    return ScoreSeries(plan.kind, rule, fn(pair.model, pair.obs, plan.lo, plan.hi), pair.label)


def pw_scores(pair: SeriesPair, rule: str) -> ScoreSeries:
    rule = _check_rule(rule)
    d = pair.model - pair.obs
    vals = d * d if rule == "SE" else np.abs(d)
    return ScoreSeries("PW", rule, vals, pair.label)


def st_scores(pair: SeriesPair, rule: str) -> ScoreSeries:
    """Score of the full model sample against each observation."""
    rule = _check_rule(rule)
    x, y = pair.model, pair.obs
    n = x.size
    if rule == "SE":
        return ScoreSeries("ST", rule, (x.mean() - y) ** 2, pair.label)
    xs = np.sort(x)
    cs = np.concatenate(([0.0], np.cumsum(xs)))
    k = np.searchsorted(xs, y, side="right")
    absdev = (y * k - cs[k]) + (cs[n] - cs[k]) - y * (n - k)
    coef = 2.0 * np.arange(1, n + 1) - 1.0 - n
    pair_term = (coef * xs).sum() / (n * n)
    return ScoreSeries("ST", rule, np.maximum(absdev / n - pair_term, 0.0), pair.label)


def theoretical_scores(
    models: Sequence[GaussianSpec], obs, rule: str, label: str = "model"
) -> ScoreSeries:
    """Closed-form scores of per-t Gaussian predictive distributions."""
    mean = np.array([f.mean for f in models], dtype=float)
    sd = np.array([f.sd for f in models], dtype=float)
    return theoretical_scores_array(mean, sd, obs, rule, label)


def theoretical_scores_array(mean, sd, obs, rule: str, label: str = "model") -> ScoreSeries:
    rule = _check_rule(rule)
    obs = np.asarray(obs, dtype=float)
    mean = np.broadcast_to(np.asarray(mean, dtype=float), obs.shape)
    if rule == "SE":
        vals = (mean - obs) ** 2
    else:
        vals = crps_gaussian_array(mean, sd, obs)
    return ScoreSeries("THEO", rule, vals, label)


def average_score(s: ScoreSeries | Sequence[float]) -> float:
    vals = np.asarray(s.values if isinstance(s, ScoreSeries) else s, dtype=float)
    if vals.size == 0:
        raise ValueError("cannot average an empty score series")
    return float(vals.mean())


def rank_models(averages: Mapping[str, float], tie_tol: float = 0.0005) -> dict[str, int]:
    """Ascending ranks, best (smallest) average first.

    Averages within ``tie_tol`` of the smallest member of their group share
    that group's minimum rank; the next group's rank skips accordingly.
    """
    if not averages:
        raise ValueError("nothing to rank")
    order = sorted(averages, key=lambda k: averages[k])
    ranks: dict[str, int] = {}
    leader = None
    for pos, key in enumerate(order, start=1):
        v = averages[key]
        if leader is None or v - leader[1] > tie_tol:
            leader = (pos, v)
        ranks[key] = leader[0]
    return {k: ranks[k] for k in averages}

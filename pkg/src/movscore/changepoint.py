"""Multiple changepoint detection in mean and variance of Gaussian series.

The segment cost is twice the negative Gaussian log-likelihood with the
segment mean and variance replaced by their maximum likelihood estimates.
:func:`pelt_detect` is the production solver; :func:`optimal_partitioning`
is the unpruned O(N^2) recursion it must agree with.

Indices in the public API are 1-based and inclusive, matching the usual
changepoint notation: a changepoint ``tau`` closes the segment ending at
``y[tau]`` (1-based), so segment ``j`` covers ``tau_j + 1 .. tau_{j+1}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PeltConfig:
    """Penalty and constraints for the penalised cost minimisation.

    ``penalty_kappa=None`` means ``penalty_p * ln(N)``, resolved per series.
    """

    penalty_kappa: float | None = None
    min_seg_len: int = 11
    variance_floor: float = 1e-8
    penalty_p: float = 3.0

    def __post_init__(self):
        if self.min_seg_len < 2:
            raise ValueError("min_seg_len must be at least 2 to estimate a variance")
        if self.variance_floor <= 0:
            raise ValueError("variance_floor must be positive")
        if self.penalty_kappa is not None and self.penalty_kappa < 0:
            raise ValueError("penalty_kappa must be nonnegative")

    def kappa(self, n: int) -> float:
        if self.penalty_kappa is not None:
            return float(self.penalty_kappa)
        return self.penalty_p * math.log(n)


@dataclass(frozen=True)
class SegmentStats:
    mean: float
    variance: float
    length: int

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class Segmentation:
    """Ordered changepoints of a series of length ``n``."""

    n: int
    changepoints: tuple[int, ...] = ()
    objective: float | None = field(default=None, compare=False)

    def __post_init__(self):
        cps = tuple(int(c) for c in self.changepoints)
        object.__setattr__(self, "changepoints", cps)
        if self.n < 1:
            raise ValueError("series length must be positive")
        prev = 0
        for c in cps:
            if not (prev < c <= self.n - 1):
                raise ValueError(f"changepoints must be strictly increasing in 1..{self.n - 1}: {cps}")
            prev = c

    @property
    def m(self) -> int:
        return len(self.changepoints)

    @property
    def bounds(self) -> np.ndarray:
        """``tau_0 .. tau_{m+1}`` including the sentinels 0 and n."""
        return np.array((0,) + self.changepoints + (self.n,), dtype=np.int64)

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.bounds)

    def segments(self) -> list[tuple[int, int]]:
        """1-based inclusive ``(start, end)`` pairs."""
        b = self.bounds
        return [(int(b[j]) + 1, int(b[j + 1])) for j in range(len(b) - 1)]

    def check_min_len(self, min_seg_len: int) -> None:
        if self.lengths.min() < min_seg_len:
            raise ValueError(
                f"segmentation {self.changepoints} has a segment shorter than {min_seg_len}"
            )


class _PrefixCost:
    """O(1) segment costs from prefix sums of the centred series.

    Sums are kept in extended precision; segments whose variance suffers
    visible cancellation are recomputed with a two-pass estimate.
    """

    def __init__(self, y, variance_floor: float):
        y = np.asarray(y, dtype=float)
        if y.ndim != 1:
            raise ValueError("series must be one-dimensional")
        if not np.all(np.isfinite(y)):
            raise ValueError("series contains non-finite values")
        self.y = y
        self.n = y.size
        self.floor = variance_floor
        yc = y.astype(np.longdouble) - np.longdouble(y.mean()) if y.size else y
        self.s1 = np.concatenate(([0], np.cumsum(yc)))
        self.s2 = np.concatenate(([0], np.cumsum(yc * yc)))
        self.s1.flags.writeable = False
        self.s2.flags.writeable = False

    def variance(self, starts, ends) -> np.ndarray:
        """MLE variances of ``y[start:end]`` (0-based half-open), floored."""
        starts, ends = np.broadcast_arrays(np.atleast_1d(starts), np.atleast_1d(ends))
        length = (ends - starts).astype(np.longdouble)
        d1 = self.s1[ends] - self.s1[starts]
        d2 = self.s2[ends] - self.s2[starts]
        var = (d2 - d1 * d1 / length) / length
        # cancellation guard: sum of squares and squared sum nearly equal
        suspect = var <= 1e-10 * (d2 / length)
        for i in np.flatnonzero(suspect):
            var[i] = np.var(self.y[starts[i] : ends[i]])
        return np.maximum(var.astype(float), self.floor)

    def cost(self, starts, ends):
        length = np.asarray(ends) - np.asarray(starts)
        var = self.variance(starts, ends)
        return length * (np.log(var) + _LOG_2PI + 1.0)


def _segment_cost_direct(y, variance_floor):
    y = np.asarray(y, dtype=float)
    var = max(float(np.mean((y - y.mean()) ** 2)), variance_floor)
    return y.size * (math.log(2.0 * math.pi * var) + 1.0)


def segment_cost(y, a: int, b: int, cfg: PeltConfig | None = None) -> float:
    """Cost of the 1-based inclusive segment ``y[a..b]``."""
    cfg = cfg or PeltConfig()
    n = len(y)
    if not (1 <= a <= b <= n):
        raise ValueError(f"segment ({a}, {b}) outside 1..{n}")
    if b - a + 1 < 2:
        raise ValueError("segment cost needs at least 2 observations")
    return float(_PrefixCost(y, cfg.variance_floor).cost(a - 1, b)[0])


def segment_stats(y, seg: Segmentation, cfg: PeltConfig | None = None) -> list[SegmentStats]:
    cfg = cfg or PeltConfig()
    y = np.asarray(y, dtype=float)
    out = []
    for a, b in seg.segments():
        part = y[a - 1 : b]
        var = max(float(np.mean((part - part.mean()) ** 2)), cfg.variance_floor)
        out.append(SegmentStats(mean=float(part.mean()), variance=var, length=b - a + 1))
    return out


def _check_length(n: int, cfg: PeltConfig):
    if n < cfg.min_seg_len:
        raise ValueError(f"series of length {n} is shorter than min_seg_len={cfg.min_seg_len}")


def _backtrack(last: np.ndarray, n: int) -> tuple[int, ...]:
    cps = []
    s = int(last[n])
    while s > 0:
        cps.append(s)
        s = int(last[s])
    return tuple(reversed(cps))


def optimal_partitioning(y, cfg: PeltConfig | None = None) -> Segmentation:
    """Exact O(N^2) minimiser of total segment cost plus ``kappa * m``."""
    cfg = cfg or PeltConfig()
    pc = _PrefixCost(y, cfg.variance_floor)
    n, L = pc.n, cfg.min_seg_len
    _check_length(n, cfg)
    kappa = cfg.kappa(n)

    F = np.full(n + 1, np.inf)
    F[0] = -kappa
    last = np.zeros(n + 1, dtype=np.int64)
    for s in range(L, n + 1):
        taus = np.arange(0, s - L + 1)
        taus = taus[np.isfinite(F[taus])]
        vals = F[taus] + pc.cost(taus, s) + kappa
        k = int(np.argmin(vals))
        F[s] = vals[k]
        last[s] = taus[k]
    return Segmentation(n, _backtrack(last, n), objective=float(F[n]))


def pelt_detect(y, cfg: PeltConfig | None = None) -> Segmentation:
    """PELT: optimal partitioning with inequality-based candidate pruning.

    A candidate ``tau`` that fails the pruning test at step ``s`` is kept
    until step ``s + min_seg_len - 1``: before then the split at ``s`` that
    justifies pruning is not yet admissible.
    """
    cfg = cfg or PeltConfig()
    pc = _PrefixCost(y, cfg.variance_floor)
    n, L = pc.n, cfg.min_seg_len
    _check_length(n, cfg)
    kappa = cfg.kappa(n)

    F = np.full(n + 1, np.inf)
    F[0] = -kappa
    last = np.zeros(n + 1, dtype=np.int64)
    cands = np.zeros(0, dtype=np.int64)
    expiry = np.zeros(0, dtype=np.int64)
    for s in range(L, n + 1):
        new = s - L
        if np.isfinite(F[new]):
            cands = np.append(cands, new)
            expiry = np.append(expiry, n + 1)
        alive = expiry > s
        if not alive.all():
            cands, expiry = cands[alive], expiry[alive]
        vals = F[cands] + pc.cost(cands, s) + kappa
        k = int(np.argmin(vals))
        F[s] = vals[k]
        last[s] = cands[k]
        prune = (vals - kappa >= F[s]) & (expiry > s + L)
        if prune.any():
            expiry[prune] = s + L
    return Segmentation(n, _backtrack(last, n), objective=float(F[n]))


def objective_value(y, seg: Segmentation, cfg: PeltConfig | None = None) -> float:
    """Total segment cost plus ``kappa * m`` for a given segmentation."""
    cfg = cfg or PeltConfig()
    n = len(y)
    if seg.n != n:
        raise ValueError(f"segmentation is for length {seg.n}, series has length {n}")
    if seg.lengths.min() < 2:
        raise ValueError("every segment needs at least 2 observations")
    pc = _PrefixCost(y, cfg.variance_floor)
    b = seg.bounds
    costs = pc.cost(b[:-1], b[1:])
    return float(np.sum(costs) + cfg.kappa(n) * seg.m)

"""Moving-window plans derived from a segmentation.

Three strategies are provided: overlapping windows of fixed width (OF),
overlapping windows of varying width (OV) and disjoint windows given by the
segments themselves (DV). A plan stores 1-based inclusive bounds ``lo[t-1]``
and ``hi[t-1]`` for every time instance ``t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from movscore.changepoint import Segmentation

KINDS = ("OF", "OV", "DV")


@dataclass(frozen=True, eq=False)
class WindowPlan:
    n: int
    kind: str
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.int64).copy()
        hi = np.asarray(self.hi, dtype=np.int64).copy()
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.shape != (self.n,) or hi.shape != (self.n,):
            raise ValueError("window bounds must have one entry per time instance")
        t = np.arange(1, self.n + 1)
        if np.any(lo < 1) or np.any(hi > self.n) or np.any(lo > t) or np.any(hi < t):
            raise ValueError("every window must contain its location and lie inside 1..n")

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo + 1

    def window(self, t: int) -> range:
        """Indices (1-based) of the window at location ``t``."""
        return range(int(self.lo[t - 1]), int(self.hi[t - 1]) + 1)

    def __eq__(self, other):
        if not isinstance(other, WindowPlan):
            return NotImplemented
        return (
            self.n == other.n
            and self.kind == other.kind
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    @classmethod
    def full(cls, n: int) -> "WindowPlan":
        """A single window covering the whole series at every location."""
        return cls(n, "ST", np.ones(n, dtype=np.int64), np.full(n, n, dtype=np.int64))

    @classmethod
    def pointwise(cls, n: int) -> "WindowPlan":
        t = np.arange(1, n + 1)
        return cls(n, "PW", t, t)


def _symmetric(n: int, kind: str, delta: np.ndarray) -> WindowPlan:
    t = np.arange(1, n + 1)
    delta = np.minimum(np.minimum(delta, t - 1), n - t)
    return WindowPlan(n, kind, t - delta, t + delta)


def of_half_width(seg: Segmentation) -> int:
    """Interior half width ``floor((median segment length - 1) / 2)``."""
    lam = float(np.median(seg.lengths))
    return int(math.floor((lam - 1.0) / 2.0))


def of_windows(seg: Segmentation) -> WindowPlan:
    delta = np.full(seg.n, of_half_width(seg), dtype=np.int64)
    return _symmetric(seg.n, "OF", delta)


def ov_windows(seg: Segmentation) -> WindowPlan:
    n = seg.n
    b = seg.bounds.astype(float)
    centers = (b[:-1] + 1.0 + b[1:]) / 2.0
    lengths = np.diff(b)
    t = np.arange(1, n + 1)
    varsigma = np.interp(t, centers, lengths)
    delta = np.floor((varsigma - 1.0) / 2.0).astype(np.int64)
    left = t <= math.floor(centers[0])
    right = t >= math.ceil(centers[-1])
    delta[left] = t[left] - 1
    delta[right] = n - t[right]
    return _symmetric(n, "OV", delta)


def dv_windows(seg: Segmentation) -> WindowPlan:
    b = seg.bounds
    lengths = np.diff(b)
    lo = np.repeat(b[:-1] + 1, lengths)
    hi = np.repeat(b[1:], lengths)
    return WindowPlan(seg.n, "DV", lo, hi)


_PLANNERS = {"OF": of_windows, "OV": ov_windows, "DV": dv_windows}


def make_plan(seg: Segmentation, kind: str) -> WindowPlan:
    try:
        return _PLANNERS[kind.upper()](seg)
    except KeyError:
        raise ValueError(f"unknown window kind {kind!r}; expected one of {KINDS}") from None

"""Proper scoring rules: sample SE/CRPS and their Gaussian closed forms.

All scores are negatively oriented (smaller is better).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianSpec:
    """Normal predictive distribution N(mean, sd**2)."""

    mean: float
    sd: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.sd)):
            raise ValueError("GaussianSpec parameters must be finite")
        if self.sd <= 0:
            raise ValueError(f"sd must be positive, got {self.sd}")


def _as_sample(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empirical sample must contain at least one value")
    if not np.all(np.isfinite(x)):
        raise ValueError("empirical sample contains non-finite values")
    return x


def _check_obs(y) -> float:
    y = float(y)
    if not math.isfinite(y):
        raise ValueError("observation must be finite")
    return y


def sample_se(x, y: float) -> float:
    """Squared error between the sample mean of `x` and the observation `y`."""
    x = _as_sample(x)
    y = _check_obs(y)
    return float((x.mean() - y) ** 2)


def sample_crps_naive(x, y: float) -> float:
    """Sample CRPS by the literal O(n^2) double sum.

    Kept as the reference implementation; use :func:`sample_crps_fast` in
    production code.
    """
    x = _as_sample(x)
    y = _check_obs(y)
    n = x.size
    xs = x.tolist()
    abs_term = 0.0
    for xj in xs:
        abs_term += abs(xj - y)
    pair_term = 0.0
    for xj in xs:
        for xk in xs:
            pair_term += abs(xj - xk)
    return abs_term / n - pair_term / (2.0 * n * n)


def sample_crps_fast(x, y: float) -> float:
    """Sample CRPS in O(n log n).

    Uses the sorted-rank identity
    ``sum_{j,k} |x_j - x_k| = 2 * sum_i (2i - 1 - n) * x_(i)``.
    """
    x = _as_sample(x)
    y = _check_obs(y)
    n = x.size
    xs = np.sort(x, kind="stable")
    coef = 2.0 * np.arange(1, n + 1) - 1.0 - n
    abs_term = np.abs(xs - y).sum() / n
    pair_term = (coef * xs).sum() / (n * n)
    return float(max(abs_term - pair_term, 0.0))


def theoretical_se(f: GaussianSpec, y: float) -> float:
    return (f.mean - _check_obs(y)) ** 2


def theoretical_crps_gaussian(f: GaussianSpec, y: float) -> float:
    """Closed-form CRPS of N(f.mean, f.sd**2) at `y`."""
    z = (_check_obs(y) - f.mean) / f.sd
    pdf = _INV_SQRT_2PI * math.exp(-0.5 * z * z)
    cdf = float(ndtr(z))
    return f.sd * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - _INV_SQRT_PI)


def crps_gaussian_array(mean, sd, y) -> np.ndarray:
    """Vectorised :func:`theoretical_crps_gaussian` over broadcastable arrays."""
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    z = (np.asarray(y, dtype=float) - mean) / sd
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return sd * (z * (2.0 * ndtr(z) - 1.0) + 2.0 * pdf - _INV_SQRT_PI)

"""Linear-trend baseline: annual means, OLS slopes and absolute slope errors."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

DECADE = 10.0


@dataclass(frozen=True, eq=False)
class AnnualSeries:
    years: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        years = np.asarray(self.years, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if years.shape != values.shape or years.ndim != 1:
            raise ValueError("years and values must be 1-D of equal length")
        if np.any(np.diff(years) <= 0):
            raise ValueError("years must be strictly increasing")
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class TrendFit:
    intercept: float
    slope: float

    def predict(self, years):
        return self.intercept + self.slope * np.asarray(years, dtype=float)


def annual_means(
    daily: Sequence[float], years: Sequence[int], expected_years: Sequence[int] | None = None
) -> AnnualSeries:
    """Per-year arithmetic means of a daily series.

    Missing values (NaN) are an error, never imputed. With ``expected_years``
    every listed year must have at least one observation.
    """
    daily = np.asarray(daily, dtype=float)
    years = np.asarray(years, dtype=np.int64)
    if daily.shape != years.shape:
        raise ValueError("one year label is needed per observation")
    if not np.all(np.isfinite(daily)):
        raise ValueError("daily series contains missing or non-finite values")
    uniq, inv = np.unique(years, return_inverse=True)
    if expected_years is not None:
        expected = {int(y) for y in expected_years}
        missing = sorted(expected - set(uniq.tolist()))
        if missing:
            raise ValueError(f"no observations for year(s) {missing}")
        extra = sorted(set(uniq.tolist()) - expected)
        if extra:
            raise ValueError(f"observations outside the expected years: {extra}")
    sums = np.bincount(inv, weights=daily)
    counts = np.bincount(inv)
    return AnnualSeries(uniq, sums / counts)


def ols_trend(s: AnnualSeries) -> TrendFit:
    """Least-squares line through ``(year, value)`` on a centred time axis."""
    if s.years.size < 3:
        raise ValueError("a trend fit needs at least 3 years")
    t = s.years.astype(float)
    tc = t - t.mean()
    sxx = float(np.dot(tc, tc))
    if sxx == 0.0:
        raise ValueError("degenerate time axis")
    ybar = float(s.values.mean())
    slope = float(np.dot(tc, s.values - ybar)) / sxx
    return TrendFit(intercept=ybar - slope * float(t.mean()), slope=slope)


def trend_error_table(
    model_slopes: Mapping[str, float], ref_slopes: Mapping[str, float]
) -> tuple[dict[str, float], float]:
    """Per-location ``|slope_model - slope_ref|`` and their spatial mean."""
    if set(model_slopes) != set(ref_slopes):
        only_m = sorted(set(model_slopes) - set(ref_slopes))
        only_r = sorted(set(ref_slopes) - set(model_slopes))
        raise ValueError(f"location keys differ: model-only {only_m[:5]}, reference-only {only_r[:5]}")
    if not model_slopes:
        raise ValueError("no locations")
    errors = {k: abs(float(model_slopes[k]) - float(ref_slopes[k])) for k in sorted(model_slopes)}
    return errors, float(np.mean(list(errors.values())))

"""Moving-window proper scores for evaluating time-series models under non-stationarity."""

from movscore.scoring import (
    GaussianSpec,
    sample_crps_fast,
    sample_crps_naive,
    sample_se,
    theoretical_crps_gaussian,
    theoretical_se,
)
from movscore.changepoint import (
    PeltConfig,
    Segmentation,
    objective_value,
    optimal_partitioning,
    pelt_detect,
    segment_cost,
    segment_stats,
)
from movscore.windows import WindowPlan, dv_windows, of_windows, ov_windows, make_plan
from movscore.evaluation import (
    SeriesPair,
    ScoreSeries,
    average_score,
    moving_scores,
    pw_scores,
    rank_models,
    st_scores,
    theoretical_scores,
)

__version__ = "0.1.0"

__all__ = [
    "GaussianSpec",
    "sample_se",
    "sample_crps_naive",
    "sample_crps_fast",
    "theoretical_se",
    "theoretical_crps_gaussian",
    "PeltConfig",
    "Segmentation",
    "segment_cost",
    "segment_stats",
    "optimal_partitioning",
    "pelt_detect",
    "objective_value",
    "WindowPlan",
    "of_windows",
    "ov_windows",
    "dv_windows",
    "make_plan",
    "SeriesPair",
    "ScoreSeries",
    "moving_scores",
    "pw_scores",
    "st_scores",
    "theoretical_scores",
    "average_score",
    "rank_models",
]

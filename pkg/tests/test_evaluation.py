import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from movscore.changepoint import Segmentation, pelt_detect
from movscore.evaluation import (
    ScoreSeries,
    SeriesPair,
    average_score,
    moving_scores,
    pw_scores,
    rank_models,
    st_scores,
    theoretical_scores,
    theoretical_scores_array,
)
from movscore.scoring import GaussianSpec, sample_crps_naive, sample_se, theoretical_crps_gaussian
from movscore.windows import WindowPlan, dv_windows, make_plan, of_windows, ov_windows
from oracles import random_segmentation


@pytest.fixture
def pair():
    rng = np.random.default_rng(7)
    y = np.r_[rng.normal(0, 1, 60), rng.normal(2, 0.4, 40)]
    x = np.r_[rng.normal(0.2, 0.8, 60), rng.normal(1.8, 0.5, 40)]
    return SeriesPair(y, x, "m")


def test_pair_validation():
    with pytest.raises(ValueError):
        SeriesPair([1.0, 2.0], [1.0], "m")
    with pytest.raises(ValueError):
        SeriesPair([1.0, np.nan], [1.0, 2.0], "m")


class TestMovingScores:
    def test_constant_model_equal_to_obs(self):
        y = np.full(50, 4.0)
        pair = SeriesPair(y, y.copy())
        for kind in ("OF", "OV", "DV"):
            s = moving_scores(pair, make_plan(Segmentation(50, (25,)), kind), "CRPS")
            assert np.all(s.values == 0)

    @pytest.mark.parametrize("kind", ["OF", "OV", "DV"])
    def test_crps_matches_per_window_naive(self, pair, kind):
        plan = make_plan(pelt_detect(pair.obs), kind)
        s = moving_scores(pair, plan, "CRPS")
        ref = [sample_crps_naive(pair.model[lo - 1 : hi], y) for lo, hi, y in zip(plan.lo, plan.hi, pair.obs)]
        np.testing.assert_allclose(s.values, ref, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("kind", ["OF", "OV", "DV"])
    def test_se_matches_per_window(self, pair, kind):
        plan = make_plan(pelt_detect(pair.obs), kind)
        s = moving_scores(pair, plan, "SE")
        ref = [sample_se(pair.model[lo - 1 : hi], y) for lo, hi, y in zip(plan.lo, plan.hi, pair.obs)]
        np.testing.assert_allclose(s.values, ref, rtol=0, atol=1e-12)

    def test_dv_se_is_segment_mean_error(self, pair):
        seg = Segmentation(100, (60,))
        s = moving_scores(pair, dv_windows(seg), "SE")
        m1 = pair.model[:60].mean()
        np.testing.assert_allclose(s.values[:60], (m1 - pair.obs[:60]) ** 2, atol=1e-12)

    def test_length_mismatch(self, pair):
        with pytest.raises(ValueError):
            moving_scores(pair, of_windows(Segmentation(90)), "CRPS")

    def test_unknown_rule(self, pair):
        with pytest.raises(ValueError):
            moving_scores(pair, of_windows(Segmentation(100)), "LOG")

    def test_chunking_does_not_change_values(self, pair, monkeypatch):
        import movscore.evaluation as ev

        plan = of_windows(Segmentation(100, (60,)))
        full = moving_scores(pair, plan, "CRPS").values
        monkeypatch.setattr(ev, "_CHUNK_CELLS", 64)
        np.testing.assert_allclose(moving_scores(pair, plan, "CRPS").values, full, rtol=0, atol=1e-13)


class TestPointwiseAndStationary:
    def test_pw_examples(self):
        p = SeriesPair([1.0, 3.0], [1.0, 5.0])
        assert pw_scores(p, "SE").values.tolist() == [0.0, 4.0]
        assert pw_scores(p, "CRPS").values.tolist() == [0.0, 2.0]

    def test_pw_crps_is_singleton_sample_crps(self, pair):
        vals = pw_scores(pair, "CRPS").values
        assert vals.tolist() == [sample_crps_naive([x], y) for x, y in zip(pair.model, pair.obs)]

    def test_pw_is_degenerate_moving(self, pair):
        plan = WindowPlan.pointwise(pair.n)
        for rule in ("SE", "CRPS"):
            np.testing.assert_allclose(pw_scores(pair, rule).values, moving_scores(pair, plan, rule).values, atol=1e-12)

    def test_st_constant_model(self):
        y = np.array([0.0, 1.0, 3.0])
        p = SeriesPair(y, np.full(3, 2.0))
        np.testing.assert_allclose(st_scores(p, "SE").values, (2.0 - y) ** 2)

    @pytest.mark.parametrize("rule", ["SE", "CRPS"])
    def test_st_is_full_window_moving(self, pair, rule):
        np.testing.assert_allclose(
            st_scores(pair, rule).values, moving_scores(pair, WindowPlan.full(pair.n), rule).values, atol=1e-12
        )

    def test_st_crps_matches_naive(self, pair):
        vals = st_scores(pair, "CRPS").values
        for t in (0, 17, 99):
            assert vals[t] == pytest.approx(sample_crps_naive(pair.model, pair.obs[t]), abs=1e-12)


class TestTheoretical:
    def test_matches_scalar(self):
        specs = [GaussianSpec(0.1 * i, 0.5 + 0.01 * i) for i in range(20)]
        y = np.linspace(-1, 1, 20)
        s = theoretical_scores(specs, y, "CRPS")
        assert s.values.tolist() == pytest.approx([theoretical_crps_gaussian(f, v) for f, v in zip(specs, y)], abs=1e-14)
        assert theoretical_scores(specs, y, "SE").values[3] == pytest.approx((0.3 - y[3]) ** 2)

    def test_true_model_expectations(self):
        rng = np.random.default_rng(3)
        sd = np.array([0.3, 0.9, 2.0])
        mean = np.array([0.0, 1.0, -2.0])
        reps = 40_000
        y = mean + sd * rng.standard_normal((reps, 3))
        se = np.mean([theoretical_scores_array(mean, sd, row, "SE").values for row in y[:5000]], axis=0)
        crps = theoretical_scores_array(mean, sd, y, "CRPS").values.mean(axis=0)
        se_all = ((mean - y) ** 2).mean(axis=0)
        np.testing.assert_allclose(se_all, sd**2, rtol=0.03)
        np.testing.assert_allclose(se, sd**2, rtol=0.06)
        np.testing.assert_allclose(crps, sd / math.sqrt(math.pi), rtol=0.01)


class TestAggregation:
    def test_average(self):
        assert average_score(ScoreSeries("PW", "SE", np.zeros(5))) == 0
        assert average_score([1, 2, 3]) == 2
        with pytest.raises(ValueError):
            average_score([])

    def test_rank_tie_pattern(self):
        avgs = dict(zip("ABCDE", (0.746, 0.746, 0.558, 0.558, 0.568)))
        assert list(rank_models(avgs).values()) == [4, 4, 1, 1, 3]

    def test_rank_all_equal(self):
        assert set(rank_models({"a": 1.0, "b": 1.0, "c": 1.0}).values()) == {1}

    def test_rank_distinct(self):
        r = rank_models({"a": 0.3, "b": 0.1, "c": 0.2})
        assert r == {"a": 3, "b": 1, "c": 2}

    def test_rank_tolerance(self):
        r = rank_models({"a": 0.1000, "b": 0.1004, "c": 0.1011}, tie_tol=0.0005)
        assert r == {"a": 1, "b": 1, "c": 3}

    @given(
        vals=st.lists(st.floats(0, 10), min_size=1, max_size=8),
        c=st.floats(-5, 5),
        a=st.floats(0.1, 10),
    )
    def test_rank_invariance(self, vals, c, a):
        avgs = {f"m{i}": v for i, v in enumerate(vals)}
        # separate values so floating error cannot cross tie boundaries
        avgs = {k: round(v, 2) for k, v in avgs.items()}
        base = rank_models(avgs, tie_tol=1e-6)
        assert rank_models({k: v + c for k, v in avgs.items()}, tie_tol=1e-6) == base
        assert rank_models({k: v * a for k, v in avgs.items()}, tie_tol=1e-6) == base


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_nonnegative_and_batched_matches_naive(self, seed):
        rng = np.random.default_rng(seed)
        n, cps, _ = random_segmentation(rng, n_max=120)
        seg = Segmentation(n, cps)
        pair = SeriesPair(rng.normal(size=n), rng.normal(size=n) * rng.uniform(0.1, 3))
        for kind in ("OF", "OV", "DV"):
            plan = make_plan(seg, kind)
            vals = moving_scores(pair, plan, "CRPS").values
            assert np.all(vals >= 0)
            t = int(rng.integers(1, n + 1))
            ref = sample_crps_naive(pair.model[plan.lo[t - 1] - 1 : plan.hi[t - 1]], pair.obs[t - 1])
            assert vals[t - 1] == pytest.approx(ref, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_se_depends_only_on_window_mean(self, seed):
        rng = np.random.default_rng(seed)
        n, cps, _ = random_segmentation(rng, n_max=150)
        seg = Segmentation(n, cps)
        y, x = rng.normal(size=n), rng.normal(size=n)
        shuffled = x.copy()
        for a, b in seg.segments():
            shuffled[a - 1 : b] = rng.permutation(shuffled[a - 1 : b])
        plan = dv_windows(seg)
        np.testing.assert_allclose(
            moving_scores(SeriesPair(y, shuffled), plan, "SE").values,
            moving_scores(SeriesPair(y, x), plan, "SE").values,
            atol=1e-12,
        )

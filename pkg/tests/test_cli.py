import json

import numpy as np
import pandas as pd
import pytest

from movscore import cli
from movscore.changepoint import pelt_detect
from movscore.io import read_plan_csv
from movscore.windows import make_plan


def _write(df, path):
    df.to_csv(path, index=False)
    return path


@pytest.fixture
def step_csv(tmp_path):
    rng = np.random.default_rng(1)
    obs = np.r_[rng.normal(0, 1, 50), rng.normal(5, 1, 50)]
    df = pd.DataFrame({"time": np.arange(1, 101), "obs": obs,
                       "good": obs + rng.normal(0, 0.3, 100), "bad": rng.normal(2.5, 1, 100)})
    return _write(df, tmp_path / "step.csv")


@pytest.fixture
def grid_csv(tmp_path):
    rng = np.random.default_rng(1)
    dates = pd.date_range("2001-01-01", periods=400, freq="D")
    rows = []
    for loc in ("a", "b", "c"):
        mu = np.sin(2 * np.pi * np.arange(400) / 365) * 3
        obs = rng.normal(mu, 1)
        rows.append(pd.DataFrame({"time": dates.strftime("%Y-%m-%d"), "location": loc, "obs": obs,
                                  "m1": mu + rng.normal(0, 1, 400), "m2": mu + 0.5 + rng.normal(0, 1, 400)}))
    return _write(pd.concat(rows), tmp_path / "grid.csv")


def run(argv, capsys=None):
    code = cli.main([str(a) for a in argv])
    return code


class TestDetect:
    def test_single_step(self, step_csv, tmp_path):
        out = tmp_path / "d"
        assert run(["detect", step_csv, "--out", out, "--no-figures"]) == 0
        cps = pd.read_csv(out / "changepoints.csv")
        assert cps["tau"].tolist() == [50]
        segs = pd.read_csv(out / "segments.csv")
        assert segs[["start", "end"]].values.tolist() == [[1, 50], [51, 100]]
        info = json.loads((out / "detect.json").read_text())
        assert info["config"]["penalty_p"] == 3.0

    def test_constant_has_no_changepoints(self, tmp_path):
        p = _write(pd.DataFrame({"time": range(1, 61), "obs": 2.0}), tmp_path / "c.csv")
        assert run(["detect", p, "--out", tmp_path / "d"]) == 0
        assert len(pd.read_csv(tmp_path / "d" / "changepoints.csv")) == 0

    @pytest.mark.parametrize("body", [
        "time,obs\n1,0.5\n2,abc\n3,1.0\n",
        "time,obs\n1,0.5\n1,0.7\n",
        "time,value\n1,0.5\n",
        "time,obs\n1,NA\n2,1\n",
    ])
    def test_malformed_input(self, tmp_path, capsys, body):
        p = tmp_path / "bad.csv"
        p.write_text(body)
        assert run(["detect", p, "--out", tmp_path / "d"]) == 2
        assert "error" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert run(["detect", tmp_path / "nope.csv", "--out", tmp_path / "d"]) == 2
        assert capsys.readouterr().err


class TestWindowsAndEvaluate:
    def test_windows_match_library(self, step_csv, tmp_path):
        out = tmp_path / "w"
        assert run(["windows", step_csv, "--out", out]) == 0
        assert (out / "figures" / "window_widths.png").stat().st_size > 0
        plans = read_plan_csv(out / "windows.csv")
        y = pd.read_csv(step_csv)["obs"].to_numpy()
        seg = pelt_detect(y)
        for kind in ("OF", "OV", "DV"):
            assert plans[""][kind] == make_plan(seg, kind)

    def test_perfect_model(self, tmp_path):
        rng = np.random.default_rng(2)
        obs = np.r_[rng.normal(0, 1, 60), rng.normal(3, 2, 60)]
        p = _write(pd.DataFrame({"time": range(1, 121), "obs": obs, "same": obs}), tmp_path / "p.csv")
        out = tmp_path / "e"
        assert run(["evaluate", p, "--out", out, "--rule", "crps", "--no-figures"]) == 0
        summary = json.loads((out / "summary.json").read_text())
        crps = summary["averages"]["CRPS"]
        assert crps["PW"]["same"] == 0.0
        for m in ("OF", "OV", "DV"):
            assert 0 < crps[m]["same"] < 1.0

    def test_identical_models_tie(self, step_csv, tmp_path):
        df = pd.read_csv(step_csv)
        df["twin"] = df["good"]
        p = _write(df, tmp_path / "twin.csv")
        out = tmp_path / "e"
        assert run(["evaluate", p, "--out", out, "--no-figures"]) == 0
        ranks = json.loads((out / "summary.json").read_text())["ranks"]
        for rule in ranks.values():
            for r in rule.values():
                assert r["good"] == r["twin"]

    def test_better_model_ranked_first(self, step_csv, tmp_path, capsys):
        out = tmp_path / "e"
        assert run(["evaluate", step_csv, "--out", out, "--st"]) == 0
        text = capsys.readouterr().out
        assert "[SE]" in text and "[CRPS]" in text
        summary = json.loads((out / "summary.json").read_text())
        assert summary["methods"] == ["OF", "OV", "DV", "PW", "ST"]
        for m in ("OF", "OV", "DV", "PW"):
            assert summary["ranks"]["CRPS"][m]["good"] == 1
        assert (out / "figures" / "evaluate_CRPS_averages.png").exists()

    def test_plan_round_trip(self, step_csv, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(["windows", step_csv, "--out", a, "--no-figures"]) == 0
        assert run(["evaluate", step_csv, "--out", a, "--no-figures"]) == 0
        assert run(["evaluate", step_csv, "--out", b, "--no-figures", "--plan", a / "windows.csv"]) == 0
        assert (a / "scores.csv").read_bytes() == (b / "scores.csv").read_bytes()

    def test_grouped_reports(self, grid_csv, tmp_path):
        out = tmp_path / "g"
        argv = ["evaluate", grid_csv, "--out", out, "--group-by", "month", "--group-by", "location", "--no-figures"]
        assert run(argv) == 0
        by_loc = pd.read_csv(out / "grouped_location.csv")
        by_month = pd.read_csv(out / "grouped_month.csv")
        # 2 rules x 4 methods x 2 models
        assert len(by_loc) == 3 * 16 and set(by_loc["group"]) == {"a", "b", "c"}
        assert by_month["group"].nunique() == 14 and len(by_month) == 14 * 16
        scores = pd.read_csv(out / "scores.csv")
        mean = scores.query("location == 'b' and model == 'm1' and method == 'DV' and rule == 'SE'")["score"].mean()
        row = by_loc.query("group == 'b' and model == 'm1' and method == 'DV' and rule == 'SE'")
        assert row["score"].item() == pytest.approx(mean, rel=1e-12)

    def test_month_grouping_needs_dates(self, step_csv, tmp_path, capsys):
        assert run(["evaluate", step_csv, "--out", tmp_path / "x", "--group-by", "month"]) == 2
        assert "dates" in capsys.readouterr().err

    def test_ragged_locations_rejected(self, tmp_path):
        df = pd.DataFrame({"time": [1, 2, 3, 1, 2], "location": list("aaabb"), "obs": 1.0, "m": 1.0})
        assert run(["evaluate", _write(df, tmp_path / "r.csv"), "--out", tmp_path / "x"]) == 2


class TestSimulate:
    def test_byte_identical_reruns(self, tmp_path, capsys):
        a = tmp_path / "a"
        names = ("series.csv", "table.json", "table.txt", "figures/simulate_C_CRPS.png")
        assert run(["simulate", "C", "--reps", 4, "--seed", 1, "--out", a]) == 0
        first = {name: (a / name).read_bytes() for name in names}
        assert run(["simulate", "C", "--reps", 4, "--seed", 1, "--out", a]) == 0
        for name in names:
            assert (a / name).read_bytes() == first[name], name
        table = json.loads((a / "table.json").read_text())
        assert table["completed"] == 4 and "ST" in table["methods"]

    def test_p_has_no_st(self, tmp_path):
        out = tmp_path / "p"
        assert run(["simulate", "P", "--reps", 1, "--out", out, "--no-figures", "--rule", "crps"]) == 0
        table = json.loads((out / "table.json").read_text())
        assert "ST" not in table["methods"]
        assert set(table["tables"]) == {"CRPS"}

    def test_unknown_preset(self, tmp_path, capsys):
        assert run(["simulate", "Q", "--out", tmp_path]) == 2
        assert "unknown scenario" in capsys.readouterr().err

    def test_json_scenario(self, tmp_path):
        cfg = {"kind": "C", "n": 80, "changepoints": [40], "replications": 3,
               "dgp": {"label": "D", "mu": [0, 2], "sigma": [1, 1]},
               "models": [{"label": "A", "mu": [0, 2], "sigma": [1, 1]}, {"label": "B", "mu": [0, 0], "sigma": [1, 1]}]}
        p = tmp_path / "s.json"
        p.write_text(json.dumps(cfg))
        assert run(["simulate", p, "--out", tmp_path / "o", "--no-figures"]) == 0
        table = json.loads((tmp_path / "o" / "table.json").read_text())
        assert table["replications"] == 3
        assert table["tables"]["CRPS"]["A"]["rank_THEO"] == 1


class TestTrend:
    @staticmethod
    def _tables(tmp_path, model_slopes, ref_slopes):
        years = np.arange(1961, 1991)
        m_rows, r_rows = [], []
        for loc, (sm, sr) in enumerate(zip(model_slopes, ref_slopes)):
            m_rows.append(pd.DataFrame({"time": years, "location": f"s{loc}", "M": sm * years}))
            r_rows.append(pd.DataFrame({"time": years, "location": f"s{loc}", "ref": sr * years + 3}))
        return _write(pd.concat(m_rows), tmp_path / "m.csv"), _write(pd.concat(r_rows), tmp_path / "r.csv")

    def test_identical_slopes_zero_error(self, tmp_path):
        m, r = self._tables(tmp_path, [0.02, -0.01], [0.02, -0.01])
        assert run(["trend", m, "--ref", r, "--out", tmp_path / "t", "--no-figures"]) == 0
        rep = json.loads((tmp_path / "t" / "trend.json").read_text())
        assert rep["mean_abs_trend_error"]["M"] == pytest.approx(0, abs=1e-9)

    def test_hand_computed(self, tmp_path):
        m, r = self._tables(tmp_path, [0.02, 0.0], [0.01, -0.03])
        assert run(["trend", m, "--ref", r, "--out", tmp_path / "t"]) == 0
        rep = json.loads((tmp_path / "t" / "trend.json").read_text())
        assert rep["units"] == "per decade"
        assert rep["mean_abs_trend_error"]["M"] == pytest.approx(0.2, abs=1e-9)
        rows = pd.read_csv(tmp_path / "t" / "trend.csv")
        assert rows["abs_error"].tolist() == pytest.approx([0.1, 0.3], abs=1e-9)
        assert (tmp_path / "t" / "figures" / "trend_errors.png").exists()

    def test_location_mismatch(self, tmp_path):
        m, _ = self._tables(tmp_path, [0.1, 0.1], [0.1, 0.1])
        other = tmp_path / "o.csv"
        _write(pd.DataFrame({"time": np.arange(1961, 1991), "location": "zz", "ref": 1.0}), other)
        assert run(["trend", m, "--ref", other, "--out", tmp_path / "t"]) == 2


class TestConfigPrecedence:
    def _args(self, argv):
        return cli.build_parser().parse_args(argv)

    def test_defaults(self):
        cfg = cli.resolve_config(self._args(["detect", "x.csv"]), environ={})
        assert cfg.penalty_p == 3.0 and cfg.min_seg_len == 11 and cfg.windows == ("OF", "OV", "DV")

    def test_file_env_flag_order(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"penalty_p": 4, "min_seg_len": 5, "tie_tol": 0.01, "windows": ["dv"]}))
        env = {"MOVSCORE_MIN_SEG_LEN": "7", "MOVSCORE_TIE_TOL": "0.02"}
        cfg = cli.resolve_config(self._args(["detect", "x.csv", "--config", str(p), "--tie-tol", "0.03"]), env)
        assert cfg.penalty_p == 4.0
        assert cfg.min_seg_len == 7
        assert cfg.tie_tol == 0.03
        assert cfg.windows == ("DV",)

    def test_unknown_config_key(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"penalty": 3}')
        with pytest.raises(ValueError, match="unknown setting"):
            cli.resolve_config(self._args(["detect", "x.csv", "--config", str(p)]), {})

    def test_bad_window_kind(self, tmp_path, capsys):
        assert run(["detect", tmp_path / "x.csv", "--windows", "zz"]) == 2

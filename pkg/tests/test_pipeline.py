import numpy as np
import pytest

from cropfuse.errors import ConfigError
from cropfuse.ingest import Series, scenario_label
from cropfuse.metrics import SeasonWindow, estimate_season_window, evi_vod_lag, fit_pc1, metric_battery, project_pc1
from cropfuse.pipeline import (
    PREDICTORS,
    CountyData,
    aggregate_counties,
    build_feature_set,
    clip_window,
    month_end_doy,
    predictor_rows,
    season_for,
    truncate,
)
from cropfuse.synth import COMPOSITE_DOY, DAILY_DOY


class TestMonthEnd:
    @pytest.mark.parametrize(
        "year, month, doy", [(2015, 1, 31), (2015, 4, 120), (2016, 4, 121), (2015, 10, 304), (2016, 12, 366)]
    )
    def test_examples(self, year, month, doy):
        assert month_end_doy(year, month) == doy

    def test_bad_month(self):
        with pytest.raises(ConfigError):
            month_end_doy(2015, 13)


class TestTruncation:
    def test_truncate(self, small_prepared):
        c = small_prepared[0][0]
        t = truncate(c, 181)
        assert t.evi.doy.max() <= 181 and t.vod.doy.max() == 181
        assert np.array_equal(t.vod.values, c.vod.values[c.vod.doy <= 181])

    def test_clip_window(self):
        w = SeasonWindow("a", 105, 285)
        assert clip_window(w, 200) == SeasonWindow("a", 105, 200)
        assert clip_window(w, 300) == w
        assert clip_window(w, 105) is None


class TestSeasonFor:
    def _county(self):
        doy = np.arange(91, 304)
        v = np.exp(-(((doy - 200) / 30.0) ** 2))
        return CountyData("a", 2015, Series(doy, v), Series(doy, v))

    def test_lookup_by_key_then_id(self):
        c = self._county()
        by_id = {"a": SeasonWindow("a", 110, 250)}
        by_key = {("a", 2015): SeasonWindow("a", 120, 240), "a": SeasonWindow("a", 110, 250)}
        assert season_for(c, by_id).start_doy == 110
        assert season_for(c, by_key).start_doy == 120

    def test_fallback_estimate(self):
        c = self._county()
        assert season_for(c) == estimate_season_window(c.evi, "a")

    def test_truncated_away(self):
        assert season_for(self._county(), {"a": SeasonWindow("a", 150, 250)}, end_doy=120) is None


class TestAggregate:
    def test_counts(self, small_bench, small_prepared):
        counties, _, _ = small_prepared
        _, reports, assignment = aggregate_counties(small_bench.pixels, small_bench.geometries, 2015)
        assert sum(len(v) for v in assignment.values()) == 40 * 3
        assert len(reports) == 40 * 3
        assert len(counties) == 40
        assert all(np.array_equal(c.evi.doy, COMPOSITE_DOY) for c in counties)
        assert all(np.array_equal(c.vod.doy, DAILY_DOY) for c in counties)
        assert all(np.all(np.isfinite(c.vod.values)) and np.all(np.isfinite(c.evi.values)) for c in counties)

    def test_ids_sorted(self, small_prepared):
        ids = [c.county_id for c in small_prepared[0]]
        assert ids == sorted(ids)


class TestPredictorRows:
    @pytest.mark.parametrize("name, width", [("evi_series", 13), ("vod_series", 213), ("evi_vod_series", 226)])
    def test_series_widths(self, small_prepared, name, width):
        X, ok = predictor_rows(small_prepared[0], name)
        assert X.shape == (40, width) and ok.all()

    def test_evi_first_in_combined(self, small_prepared):
        counties = small_prepared[0]
        X, _ = predictor_rows(counties, "evi_vod_series")
        assert np.array_equal(X[3, :13], counties[3].evi.values)
        assert np.array_equal(X[3, 13:], counties[3].vod.values)

    def test_lag_column(self, small_prepared):
        counties = small_prepared[0]
        X, ok = predictor_rows(counties, "lag")
        assert ok.all()
        assert X[5, 0] == evi_vod_lag(counties[5].evi, counties[5].vod).lag_days

    def test_pc1_transductive(self, small_prepared):
        counties, _, seasons = small_prepared
        X, ok = predictor_rows(counties, "vod_pc1", seasons)
        B = np.vstack([metric_battery(c.vod, seasons[c.county_id]).as_array() for c in counties])
        proj = fit_pc1(B)
        assert np.allclose(X[:, 0], project_pc1(B, proj), atol=1e-12)

    def test_all_predictors_finite(self, small_prepared):
        counties, _, seasons = small_prepared
        for name in PREDICTORS:
            X, ok = predictor_rows(counties, name, seasons)
            assert ok.all(), name

    def test_unknown(self, small_prepared):
        with pytest.raises(ConfigError):
            predictor_rows(small_prepared[0], "ndvi_max")


class TestFeatureSet:
    def test_labels_match_records(self, small_prepared):
        counties, records, seasons = small_prepared
        fs = build_feature_set(counties, records, "total", "evi_max", seasons)
        assert len(fs) == 40
        for cid, y in zip(fs.county_ids, fs.y):
            assert y == scenario_label(records[(cid, 2015)], "total")

    def test_crop_scenario_filters(self, small_bench, small_prepared):
        counties, records, seasons = small_prepared
        fs = build_feature_set(counties, records, "wheat", "evi_max", seasons)
        growers = {c.county_id for c in small_bench.counties if c.crop_mix["wheat"] > 0}
        assert set(fs.county_ids) == growers

    def test_truncated_series_shorter(self, small_prepared):
        counties, records, seasons = small_prepared
        fs = build_feature_set(counties, records, "total", "vod_series", seasons, end_doy=month_end_doy(2015, 6))
        assert fs.X.shape[1] == month_end_doy(2015, 6) - 90

    def test_early_window_drops_metric_rows(self, small_prepared):
        counties, records, seasons = small_prepared
        # the regional season opens on day 105; nothing is left by day 100
        fs = build_feature_set(counties, records, "total", "vod_max", seasons, end_doy=100)
        assert len(fs) == 0

    def test_unknown_scenario(self, small_prepared):
        counties, records, seasons = small_prepared
        with pytest.raises(ConfigError):
            build_feature_set(counties, records, "rice", "evi_max", seasons)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_lag, pca_svd

from cropfuse.errors import DataError, DegenerateFeatureError, InsufficientOverlapError, WindowError
from cropfuse.ingest import Series
from cropfuse.metrics import (
    BATTERY_FIELDS,
    MetricBattery,
    SeasonWindow,
    estimate_season_window,
    evi_vod_lag,
    fit_pc1,
    lag_correlations,
    metric_battery,
    metric_max,
    metric_small_integral,
    project_pc1,
)
from cropfuse.synth import COMPOSITE_DOY, DAILY_DOY, PhenoParams, double_logistic, generate_pair

W = SeasonWindow("c", 100, 200)


def series(doy, values):
    return Series(np.asarray(doy), np.asarray(values, float))


def triangle(height, start, width):
    doy = np.arange(91, 304)
    mid = start + width / 2
    v = np.clip(height * (1 - np.abs(doy - mid) / (width / 2)), 0, None)
    return series(doy, v)


class TestSeasonWindow:
    def test_order(self):
        with pytest.raises(DataError):
            SeasonWindow("c", 200, 200)


class TestMax:
    def test_constant(self):
        assert metric_max(series(np.arange(91, 304), np.full(213, 0.4)), W) == 0.4

    def test_triangle(self):
        assert metric_max(triangle(0.9, 110, 60), W) == pytest.approx(0.9)

    def test_peak_outside_window(self):
        s = triangle(0.9, 220, 40)
        sel = (s.doy >= 100) & (s.doy <= 200)
        assert metric_max(s, W) == s.values[sel].max()

    def test_empty_window(self):
        with pytest.raises(WindowError):
            metric_max(series([1, 2, 3], [0, 1, 0]), W)


class TestSmallIntegral:
    def test_constant_zero(self):
        assert metric_small_integral(series(np.arange(91, 304), np.full(213, 0.4)), W) == 0.0

    def test_triangle_area(self):
        # h d / 2 on a zero base inside the window
        assert metric_small_integral(triangle(0.6, 120, 40), W) == pytest.approx(0.6 * 40 / 2, rel=1e-12)

    def test_single_sample(self):
        assert metric_small_integral(series([150], [0.7]), W) == 0.0

    @given(seed=st.integers(0, 10_000))
    def test_non_negative(self, seed):
        v = np.random.default_rng(seed).uniform(0, 1, 213)
        assert metric_small_integral(series(np.arange(91, 304), v), W) >= 0


class TestBattery:
    def test_constant(self):
        b = metric_battery(series(np.arange(100, 201), np.full(101, 0.3)), W)
        assert (b.range, b.std, b.small_integral, b.maximum, b.average) == (0, 0, 0, 0.3, pytest.approx(0.3))
        assert b.large_integral == pytest.approx(0.3 * 100)

    def test_two_point(self):
        b = metric_battery(series([100, 101], [0.0, 1.0]), SeasonWindow("c", 100, 101))
        assert b.range == 1.0 and b.large_integral == 0.5 and b.std == 0.5

    @given(seed=st.integers(0, 10_000), c=st.floats(0.1, 10))
    def test_invariants_and_scaling(self, seed, c):
        v = np.random.default_rng(seed).uniform(0.01, 1, 213)
        s = series(np.arange(91, 304), v)
        b = metric_battery(s, W)
        assert b.range >= 0 and b.std >= 0 and b.large_integral >= b.small_integral >= 0
        assert b.maximum >= b.average
        bc = metric_battery(series(s.doy, c * v), W)
        for name in ("range", "std", "small_integral", "large_integral", "maximum", "average"):
            assert getattr(bc, name) == pytest.approx(c * getattr(b, name), rel=1e-10)

    def test_field_order(self):
        assert BATTERY_FIELDS == ("range", "std", "small_integral", "large_integral", "maximum", "average")


class TestEstimatedWindow:
    def test_crossings(self):
        s = triangle(1.0, 140, 100)
        # threshold 0.21 sits between grid days: |d - 190| <= 39.5
        w = estimate_season_window(s, fraction=0.21)
        assert w.start_doy == 151 and w.end_doy == 229

    def test_flat_uses_support(self):
        w = estimate_season_window(series([10, 11, 12], [0.2, 0.2, 0.2]))
        assert (w.start_doy, w.end_doy) == (10, 12)


class TestPc1:
    def test_oracle_match(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            A = rng.normal(size=(40, 6)) @ rng.normal(size=(6, 6))
            proj = fit_pc1(A)
            loading, evals = pca_svd(A)
            assert min(np.abs(proj.loading - loading).max(), np.abs(proj.loading + loading).max()) <= 1e-10
            assert np.allclose(proj.eigenvalues, evals, atol=1e-10)

    def test_projection_variance(self, rng):
        A = rng.normal(size=(50, 6)) * [1, 2, 3, 1, 1, 1]
        A[:, 1] += A[:, 0]
        proj = fit_pc1(A)
        scores = project_pc1(A, proj)
        assert np.var(scores, ddof=1) == pytest.approx(proj.eigenvalues[0], abs=1e-8)
        assert np.linalg.norm(proj.loading) == pytest.approx(1.0, abs=1e-12)

    def test_correlated_pair(self, rng):
        A = rng.normal(size=(400, 6))
        A[:, 2] = 3 * A[:, 4] + 1  # perfectly correlated once standardized
        proj = fit_pc1(A)
        assert abs(proj.loading[2]) == pytest.approx(abs(proj.loading[4]), abs=1e-10)
        assert abs(proj.loading[2]) == pytest.approx(1 / np.sqrt(2), abs=0.05)

    def test_oriented_to_maximum(self, rng):
        A = rng.normal(size=(60, 6))
        A[:, 4] = A[:, 0] - A[:, 1]
        proj = fit_pc1(A)
        scores = project_pc1(A, proj)
        assert np.corrcoef(scores, A[:, 4])[0, 1] > 0

    def test_mean_projects_to_zero(self, rng):
        A = rng.normal(size=(30, 6))
        proj = fit_pc1(A)
        assert project_pc1(A.mean(axis=0), proj) == pytest.approx(0.0, abs=1e-12)
        b = MetricBattery(*A.mean(axis=0))
        assert project_pc1(b, proj) == pytest.approx(0.0, abs=1e-12)

    def test_held_out_matches_matrix_product(self, rng):
        A = rng.normal(size=(30, 6))
        proj = fit_pc1(A)
        x = rng.normal(size=6)
        expected = proj.orientation_sign * float(((x - proj.means) / proj.stds) @ proj.loading)
        assert project_pc1(x, proj) == pytest.approx(expected, abs=1e-12)

    def test_isotropic_flagged(self):
        # rows of +-sqrt(n) e_i give an identity covariance
        A = np.vstack([np.eye(6), -np.eye(6)]) * np.sqrt(11)
        assert fit_pc1(A).unstable

    def test_degenerate_column(self, rng):
        A = rng.normal(size=(20, 6))
        A[:, 3] = 1.0
        with pytest.raises(DegenerateFeatureError):
            fit_pc1(A)

    def test_too_few_rows(self, rng):
        with pytest.raises(DataError):
            fit_pc1(rng.normal(size=(5, 6)))


class TestLag:
    def _pair(self, lag, noise=0.0, seed=0, **kw):
        p = PhenoParams(vod_lag=lag, noise_std=noise, **kw)
        return generate_pair(p, seed)

    def test_shift_21(self):
        pr = self._pair(21)
        res = evi_vod_lag(pr.evi, pr.vod)
        assert res.lag_days == 21 and res.peak_correlation == pytest.approx(1.0, abs=1e-3)

    def test_exact_copy(self):
        doy = np.arange(91, 304)
        v = double_logistic(doy, PhenoParams())
        assert evi_vod_lag(series(doy, v), series(doy, v)).lag_days == 0
        assert evi_vod_lag(series(doy, v), series(doy, v)).peak_correlation == pytest.approx(1.0, abs=1e-12)

    def test_all_lags_skipped(self):
        doy = np.arange(0, 20)
        with pytest.raises(InsufficientOverlapError):
            evi_vod_lag(series(doy, doy * 1.0), series(doy, doy * 2.0))

    def test_gap_rejected(self):
        with pytest.raises(DataError):
            evi_vod_lag(series([1, 17, 33], [0, 1, 0]), series(np.arange(40), np.r_[np.nan, np.ones(39)]))

    def test_ties_to_smallest(self):
        # periodic VOD: two lags give identical correlation
        doy = np.arange(0, 200)
        evi = series(doy[::1], np.sin(2 * np.pi * doy / 50))
        vod = series(np.arange(0, 400), np.sin(2 * np.pi * np.arange(0, 400) / 50))
        lags, corr = lag_correlations(evi, vod, (0, 120))
        best = np.flatnonzero(corr >= np.nanmax(corr) - 1e-12)
        assert evi_vod_lag(evi, vod, (0, 120)).lag_days == lags[best[0]]

    @settings(deadline=None, max_examples=40)
    @given(seed=st.integers(0, 10_000))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        evi = series(COMPOSITE_DOY, rng.uniform(0, 1, COMPOSITE_DOY.size))
        vod = series(DAILY_DOY, rng.uniform(0, 1, DAILY_DOY.size))
        lo = int(rng.integers(0, 40))
        hi = lo + int(rng.integers(0, 80))
        lag, r = brute_lag(evi.doy, evi.values, vod.doy, vod.values, lo, hi)
        if lag is None:
            with pytest.raises(InsufficientOverlapError):
                evi_vod_lag(evi, vod, (lo, hi))
        else:
            res = evi_vod_lag(evi, vod, (lo, hi))
            assert res.lag_days == lag and res.peak_correlation == pytest.approx(r, abs=1e-12)

    @settings(deadline=None, max_examples=40)
    @given(a=st.floats(0.1, 50), b=st.floats(-5, 5), lag=st.integers(6, 79))
    def test_affine_invariance(self, a, b, lag):
        pr = self._pair(lag, noise=0.02, seed=lag)
        base = evi_vod_lag(pr.evi, pr.vod).lag_days
        assert evi_vod_lag(series(pr.evi.doy, a * pr.evi.values + b), pr.vod).lag_days == base
        assert evi_vod_lag(pr.evi, series(pr.vod.doy, a * pr.vod.values + b)).lag_days == base

    def test_scaling_leaves_lag(self):
        pr = self._pair(30)
        assert evi_vod_lag(series(pr.evi.doy, 3 * pr.evi.values), series(pr.vod.doy, 3 * pr.vod.values)).lag_days == 30

    def test_noisy_recovery(self):
        hits = 0
        for seed in range(100):
            pr = self._pair(40, noise=0.05 * 0.4, seed=seed)
            hits += abs(evi_vod_lag(pr.evi, pr.vod).lag_days - 40) <= 3
        assert hits >= 95

    def test_negative_lags_configurable(self):
        doy = np.arange(91, 304)
        v = double_logistic(doy, PhenoParams())
        early = double_logistic(doy + 10, PhenoParams())
        assert evi_vod_lag(series(doy, v), series(doy, early), (-30, 30)).lag_days == -10

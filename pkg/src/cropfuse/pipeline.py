"""From pixel series and surveys to per-county predictor matrices."""

from __future__ import annotations

import calendar
import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .ingest import (
    CountyGeometry,
    CountyRecord,
    CropReport,
    FeatureSet,
    PixelSeries,
    Series,
    UnitTable,
    assign_pixels_to_counties,
    build_county_record,
    county_mean_series,
    scenario_label,
    stack_features,
)
from .metrics import (
    DEFAULT_LAG_RANGE,
    SeasonWindow,
    evi_vod_lag,
    estimate_season_window,
    fit_pc1,
    metric_battery,
    metric_max,
    metric_small_integral,
    project_pc1,
)
from .preprocess import (
    DEFAULT_MIN_GAP_DAYS,
    DEFAULT_P_MAX,
    DEFAULT_WINDOW,
    ScreeningReport,
    fill_composites,
    preprocess_vod_pixel,
    screen_frozen,
)

log = logging.getLogger(__name__)

SCENARIOS = ("total", "corn", "soybean", "wheat")
METRIC_PREDICTORS = ("evi_max", "vod_max", "evi_int", "vod_int", "evi_pc1", "vod_pc1")
SERIES_PREDICTORS = ("evi_series", "vod_series", "evi_vod_series")
PREDICTORS = METRIC_PREDICTORS + ("lag",) + SERIES_PREDICTORS


@dataclass
class PreprocessConfig:
    window: int = DEFAULT_WINDOW
    p_max: int = DEFAULT_P_MAX
    min_gap_days: int = DEFAULT_MIN_GAP_DAYS


@dataclass
class CountyData:
    county_id: str
    year: int
    evi: Series
    vod: Series

    @property
    def key(self) -> tuple[str, int]:
        return self.county_id, self.year


def aggregate_counties(
    pixels: Sequence[PixelSeries],
    geometries: Sequence[CountyGeometry],
    year: int,
    config: PreprocessConfig | None = None,
) -> tuple[list[CountyData], list[ScreeningReport], dict[str, list[str]]]:
    """Preprocess every assigned pixel and average to county series.

    Microwave pixels go through the full quality chain; optical composites
    are masked by their quality flag, averaged, and any composite missing
    for the whole county is interpolated. Counties left without a usable
    pixel of either sensor are skipped.
    """
    config = config or PreprocessConfig()
    assignment = assign_pixels_to_counties(pixels, geometries)
    by_key = {(p.pixel_id, p.sensor): p for p in pixels}
    evi_axis = np.unique(np.concatenate([p.doy for p in pixels if p.sensor == "EVI"] or [np.zeros(0, int)]))

    counties, reports = [], []
    for cid in sorted(assignment):
        ids = assignment[cid]
        if not ids:
            continue
        evi_px = [screen_frozen(by_key[(i, "EVI")]) for i in ids if (i, "EVI") in by_key]
        vod_series = []
        for i in ids:
            if (i, "VOD") not in by_key:
                continue
            filled, report = preprocess_vod_pixel(
                by_key[(i, "VOD")], config.window, config.p_max, config.min_gap_days
            )
            reports.append(report)
            if filled is not None:
                vod_series.append(filled)
        if not evi_px or not vod_series:
            log.info("county %s skipped: no usable %s pixels", cid, "EVI" if not evi_px else "VOD")
            continue
        try:
            evi_mean = county_mean_series(evi_px)
            evi = fill_composites(_reindex(evi_mean, evi_axis))
            vod = county_mean_series(vod_series)
        except DataError as err:
            log.info("county %s skipped: %s", cid, err)
            continue
        counties.append(CountyData(cid, int(year), evi, vod))
    return counties, reports, assignment


def _reindex(series: Series, axis: np.ndarray) -> Series:
    values = np.full(axis.size, np.nan)
    pos = np.searchsorted(axis, series.doy)
    values[pos] = series.values
    return Series(axis.copy(), values)


def build_records(
    survey: Mapping[tuple[str, int], Sequence[CropReport]], table: UnitTable | None = None
) -> dict[tuple[str, int], CountyRecord]:
    out = {}
    for (cid, year), crops in sorted(survey.items()):
        try:
            out[(cid, year)] = build_county_record(cid, year, crops, table)
        except DataError as err:
            log.warning("survey for %s/%s skipped: %s", cid, year, err)
    return out


# -- truncation ----------------------------------------------------------------


def month_end_doy(year: int, month: int) -> int:
    if not 1 <= month <= 12:
        raise ConfigError(f"month out of range: {month}")
    days = [calendar.monthrange(year, m)[1] for m in range(1, month + 1)]
    return int(sum(days))


def truncate(data: CountyData, end_doy: int) -> CountyData:
    e = data.evi.doy <= end_doy
    v = data.vod.doy <= end_doy
    return CountyData(
        data.county_id,
        data.year,
        Series(data.evi.doy[e], data.evi.values[e]),
        Series(data.vod.doy[v], data.vod.values[v]),
    )


def clip_window(window: SeasonWindow, end_doy: int) -> SeasonWindow | None:
    end = min(window.end_doy, end_doy)
    if end <= window.start_doy:
        return None
    return SeasonWindow(window.county_id, window.start_doy, end)


# -- predictors ----------------------------------------------------------------


def season_for(data: CountyData, seasons: Mapping | None = None, end_doy: int | None = None):
    """Configured season window for a county (by ``(id, year)`` or id), else estimated from EVI.

    Returns None when truncation at ``end_doy`` leaves no window.
    """
    window = None
    if seasons is not None:
        window = seasons.get(data.key) or seasons.get(data.county_id)
    if window is None:
        window = estimate_season_window(data.evi, data.county_id)
    if end_doy is not None:
        window = clip_window(window, end_doy)
    return window


def predictor_rows(
    counties: Sequence[CountyData],
    predictor: str,
    seasons: Mapping | None = None,
    lag_range: tuple[int, int] = DEFAULT_LAG_RANGE,
    end_doy: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Feature rows for ``predictor``; returns ``(X, ok)``.

    Rows where the predictor cannot be computed (e.g. a season window or lag
    overlap that a truncated window no longer covers) are NaN with
    ``ok=False``. Principal components are fitted on all computable rows.
    """
    if predictor not in PREDICTORS:
        raise ConfigError(f"unknown predictor {predictor!r}")
    n = len(counties)
    if predictor in SERIES_PREDICTORS:
        rows = []
        for c in counties:
            if predictor == "evi_series":
                rows.append(np.asarray(c.evi.values, float))
            elif predictor == "vod_series":
                rows.append(np.asarray(c.vod.values, float))
            else:
                rows.append(stack_features(c.evi.values, c.vod.values, None, None))
        widths = {r.size for r in rows}
        if len(widths) > 1:
            raise DataError(f"counties have different series lengths {sorted(widths)}")
        X = np.vstack(rows) if rows else np.zeros((0, 0))
        return X, np.all(np.isfinite(X), axis=1)

    X = np.full((n, 1), np.nan)
    if predictor == "lag":
        for k, c in enumerate(counties):
            try:
                X[k, 0] = evi_vod_lag(c.evi, c.vod, lag_range).lag_days
            except DataError:
                pass
        return X, np.isfinite(X[:, 0])

    sensor, kind = predictor.split("_")
    batteries = np.full((n, 6), np.nan)
    for k, c in enumerate(counties):
        series = c.evi if sensor == "evi" else c.vod
        try:
            window = season_for(c, seasons, end_doy)
            if window is None:
                continue
            if kind == "max":
                X[k, 0] = metric_max(series, window)
            elif kind == "int":
                X[k, 0] = metric_small_integral(series, window)
            else:
                batteries[k] = metric_battery(series, window).as_array()
        except DataError:
            continue
    if kind == "pc1":
        ok = np.all(np.isfinite(batteries), axis=1)
        if ok.sum() >= batteries.shape[1]:
            try:
                proj = fit_pc1(batteries[ok])
                X[ok, 0] = project_pc1(batteries[ok], proj)
            except DataError as err:
                log.info("PC1 unavailable: %s", err)
    return X, np.isfinite(X[:, 0])


def build_feature_set(
    counties: Sequence[CountyData],
    records: Mapping[tuple[str, int], CountyRecord],
    scenario: str,
    predictor: str,
    seasons: Mapping | None = None,
    lag_range: tuple[int, int] = DEFAULT_LAG_RANGE,
    end_doy: int | None = None,
) -> FeatureSet:
    """Rows for counties that have a survey label for ``scenario`` and a computable predictor."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    counties = sorted(counties, key=lambda c: (c.year, c.county_id))
    if end_doy is not None:
        counties = [truncate(c, end_doy) for c in counties]
    labelled = []
    labels = []
    for c in counties:
        rec = records.get(c.key)
        label = scenario_label(rec, scenario) if rec is not None else None
        if label is not None:
            labelled.append(c)
            labels.append(label)
    X, ok = predictor_rows(labelled, predictor, seasons, lag_range, end_doy)
    if not ok.all():
        log.info("%s: %d counties lack a computable %s", scenario, int((~ok).sum()), predictor)
    keep = np.flatnonzero(ok)
    return FeatureSet(
        [labelled[i].county_id for i in keep],
        np.array([labelled[i].year for i in keep], dtype=int),
        X[keep] if X.size else np.zeros((0, X.shape[1] if X.ndim == 2 else 0)),
        np.array(labels, dtype=float)[keep],
    )

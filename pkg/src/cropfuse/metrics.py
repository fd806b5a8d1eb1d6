"""Seasonal summary metrics and the optical/microwave lag metric."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import (
    DataError,
    DegenerateFeatureError,
    InsufficientOverlapError,
    WindowError,
)
from .ingest import Series

DEFAULT_LAG_RANGE = (0, 120)
MIN_OVERLAP_DAYS = 30


@dataclass(frozen=True)
class SeasonWindow:
    county_id: str
    start_doy: int
    end_doy: int

    def __post_init__(self):
        if not self.start_doy < self.end_doy:
            raise DataError(
                f"{self.county_id}: season start {self.start_doy} must precede end {self.end_doy}"
            )


@dataclass
class MetricBattery:
    range: float
    std: float
    small_integral: float
    large_integral: float
    maximum: float
    average: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in BATTERY_FIELDS])


BATTERY_FIELDS = tuple(f.name for f in fields(MetricBattery))


def _in_window(series: Series, window: SeasonWindow) -> tuple[np.ndarray, np.ndarray]:
    doy = np.asarray(series.doy, dtype=float)
    values = np.asarray(series.values, dtype=float)
    sel = (doy >= window.start_doy) & (doy <= window.end_doy)
    if not sel.any():
        raise WindowError(
            f"{window.county_id}: no samples in [{window.start_doy}, {window.end_doy}]"
        )
    if not np.all(np.isfinite(values[sel])):
        raise DataError(f"{window.county_id}: series has gaps inside the season window")
    return doy[sel], values[sel]


def _trapezoid(y, x) -> float:
    if y.size < 2:
        return 0.0
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def metric_max(series: Series, window: SeasonWindow) -> float:
    _, v = _in_window(series, window)
    return float(v.max())


def metric_small_integral(series: Series, window: SeasonWindow) -> float:
    """Trapezoidal area above the in-window minimum (index x days)."""
    d, v = _in_window(series, window)
    return _trapezoid(v - v.min(), d)


def metric_battery(series: Series, window: SeasonWindow) -> MetricBattery:
    """All six seasonal metrics over the window.

    ``std`` is the population standard deviation and ``large_integral`` the
    trapezoidal area under the raw values.
    """
    d, v = _in_window(series, window)
    return MetricBattery(
        range=float(v.max() - v.min()),
        std=float(v.std()),
        small_integral=_trapezoid(v - v.min(), d),
        large_integral=_trapezoid(v, d),
        maximum=float(v.max()),
        average=float(v.mean()),
    )


def estimate_season_window(
    series: Series, county_id: str = "", fraction: float = 0.2
) -> SeasonWindow:
    """First and last crossing of ``fraction`` of the seasonal amplitude.

    Fallback when no phenology table is supplied.
    """
    doy = np.asarray(series.doy)
    v = np.asarray(series.values, dtype=float)
    ok = np.isfinite(v)
    if ok.sum() < 2:
        raise WindowError(f"{county_id}: too few samples to estimate a season")
    lo, hi = v[ok].min(), v[ok].max()
    above = np.flatnonzero(ok & (v >= lo + fraction * (hi - lo)))
    start, end = int(doy[above[0]]), int(doy[above[-1]])
    if start == end:
        # flat or single-peak series: fall back to the full support
        start, end = int(doy[ok][0]), int(doy[ok][-1])
    return SeasonWindow(county_id, start, end)


# -- first principal component ------------------------------------------------


@dataclass
class Pc1Projection:
    means: np.ndarray
    stds: np.ndarray
    loading: np.ndarray
    orientation_sign: int
    eigenvalues: np.ndarray
    unstable: bool = False

    @property
    def explained_variance(self) -> float:
        return float(self.eigenvalues[0])


def fit_pc1(batteries, orient_column: int = BATTERY_FIELDS.index("maximum"), tol: float = 1e-8):
    """Leading principal component of z-scored metric columns.

    The loading is oriented so projections correlate positively with
    ``orient_column`` (the seasonal maximum by default). ``unstable`` is set
    when the two largest eigenvalues are within ``tol`` (relative), i.e. the
    direction is not identifiable.
    """
    A = np.asarray(batteries, dtype=float)
    if A.ndim != 2:
        raise DataError("batteries must be a 2-D array")
    n, m = A.shape
    if n < m:
        raise DataError(f"need at least {m} rows to fit PC1, got {n}")
    means = A.mean(axis=0)
    stds = A.std(axis=0, ddof=1)
    if np.any(~(stds > 0)):
        bad = [i for i in range(m) if not stds[i] > 0]
        raise DegenerateFeatureError(f"zero-variance metric columns {bad}")
    Z = (A - means) / stds
    cov = Z.T @ Z / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    loading = evecs[:, 0] / np.linalg.norm(evecs[:, 0])
    sign = -1 if loading[orient_column] < 0 else 1
    unstable = m > 1 and (evals[0] - evals[1]) <= tol * max(abs(evals[0]), 1.0)
    return Pc1Projection(means, stds, loading, sign, evals, bool(unstable))


def project_pc1(battery, proj: Pc1Projection):
    """Signed score along the fitted component; accepts one battery or a matrix."""
    if isinstance(battery, MetricBattery):
        battery = battery.as_array()
    z = (np.asarray(battery, dtype=float) - proj.means) / proj.stds
    score = proj.orientation_sign * (z @ proj.loading)
    return float(score) if np.ndim(score) == 0 else score


# -- cross-sensor lag ---------------------------------------------------------


@dataclass
class LagResult:
    lag_days: int
    peak_correlation: float


def lag_correlations(
    evi: Series,
    vod: Series,
    lag_range: tuple[int, int] = DEFAULT_LAG_RANGE,
    min_overlap: int = MIN_OVERLAP_DAYS,
) -> tuple[np.ndarray, np.ndarray]:
    """Pearson correlation of EVI(t) with VOD(t + lag) for every integer lag.

    The optical series is linearly interpolated to a daily grid within its
    own support (no extrapolation). Lags with fewer than ``min_overlap``
    shared days, or where either side is constant, get NaN.
    """
    lag_min, lag_max = lag_range
    if lag_min > lag_max:
        raise DataError(f"empty lag range {lag_range}")
    e_doy = np.asarray(evi.doy, dtype=float)
    e_val = np.asarray(evi.values, dtype=float)
    v_doy = np.asarray(vod.doy, dtype=int)
    v_val = np.asarray(vod.values, dtype=float)
    if e_doy.size < 2 or v_doy.size < 2:
        raise InsufficientOverlapError("series too short for lag analysis")
    if not (np.all(np.isfinite(e_val)) and np.all(np.isfinite(v_val))):
        raise DataError("lag analysis needs gap-free series")
    grid = np.arange(int(np.ceil(e_doy[0])), int(np.floor(e_doy[-1])) + 1)
    e_daily = np.interp(grid, e_doy, e_val)
    v_dense = np.full(v_doy[-1] - v_doy[0] + 1, np.nan)
    v_dense[v_doy - v_doy[0]] = v_val

    lags = np.arange(lag_min, lag_max + 1)
    corr = np.full(lags.size, np.nan)
    for k, lag in enumerate(lags):
        idx = grid + lag - v_doy[0]
        inside = (idx >= 0) & (idx < v_dense.size)
        a = e_daily[inside]
        b = v_dense[idx[inside]]
        ok = np.isfinite(b)
        if ok.sum() < min_overlap:
            continue
        a = a[ok] - a[ok].mean()
        b = b[ok] - b[ok].mean()
        denom = np.sqrt((a @ a) * (b @ b))
        if denom > 0:
            corr[k] = np.clip((a @ b) / denom, -1.0, 1.0)
    return lags, corr


def evi_vod_lag(
    evi: Series,
    vod: Series,
    lag_range: tuple[int, int] = DEFAULT_LAG_RANGE,
    min_overlap: int = MIN_OVERLAP_DAYS,
) -> LagResult:
    """Lag (days) at which the microwave series best matches the optical one.

    Ties resolve to the smallest lag.
    """
    lags, corr = lag_correlations(evi, vod, lag_range, min_overlap)
    if not np.isfinite(corr).any():
        raise InsufficientOverlapError(
            f"no lag in {lag_range} has {min_overlap} overlapping days"
        )
    k = int(np.nanargmax(corr))
    return LagResult(int(lags[k]), float(corr[k]))

"""Per-pixel quality chain for the daily microwave series.

Order of operations: mask flagged samples, 7-day moving average over the
samples that remain, autoregressive gap filling with the order chosen by AIC,
then the min/max separation screen.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    HeadGapError,
    InsufficientDataError,
    RankError,
)
from .ingest import PixelSeries, Series

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 7
DEFAULT_P_MAX = 10
DEFAULT_MIN_GAP_DAYS = 19
# largest companion-matrix eigenvalue modulus accepted for gap filling
MAX_SPECTRAL_RADIUS = 1.05

REASONS = ("none", "frozen_flagged", "short_dynamic_range", "insufficient_data")


@dataclass
class ArModel:
    order: int
    coefficients: np.ndarray
    intercept: float
    residual_variance: float
    aic: float
    n_eff: int

    @property
    def spectral_radius(self) -> float:
        """Largest root modulus of the recursion; above 1 forecasts diverge."""
        phi = np.asarray(self.coefficients, dtype=float)
        if phi.size == 0:
            return 0.0
        return float(np.abs(np.roots(np.r_[1.0, -phi])).max())


@dataclass
class ScreeningReport:
    pixel_id: str
    dropped: bool
    reason: str
    min_max_gap_days: int

    def __post_init__(self):
        if self.reason not in REASONS:
            raise ValueError(f"unknown screening reason {self.reason!r}")
        if self.dropped != (self.reason != "none"):
            raise ValueError("dropped must be set exactly when a reason is given")


def screen_frozen(pixel: PixelSeries) -> PixelSeries:
    """Blank out samples whose quality flag is false; the time axis is kept."""
    values = np.where(pixel.quality, pixel.values, np.nan)
    return replace(pixel, values=values, quality=pixel.quality.copy())


def _as_daily(series: Series) -> Series:
    doy = np.asarray(series.doy, dtype=int)
    values = np.asarray(series.values, dtype=float)
    if doy.size == 0:
        return Series(doy, values)
    grid = np.arange(doy[0], doy[-1] + 1)
    if grid.size == doy.size:
        return Series(doy, values)
    dense = np.full(grid.size, np.nan)
    dense[doy - doy[0]] = values
    return Series(grid, dense)


def moving_average(series: Series, window: int = DEFAULT_WINDOW) -> Series:
    """Centered moving mean over the available samples of a daily series.

    Each output day averages the finite samples within ``window // 2`` days;
    edges use the truncated window. Missing days stay missing.
    """
    if window < 1 or window % 2 == 0:
        raise ConfigError(f"window must be a positive odd integer, got {window}")
    daily = _as_daily(series)
    values = daily.values
    ok = np.isfinite(values)
    kernel = np.ones(window)
    sums = np.convolve(np.where(ok, values, 0.0), kernel, mode="same")
    counts = np.convolve(ok.astype(float), kernel, mode="same")
    with np.errstate(invalid="ignore", divide="ignore"):
        smoothed = np.where(ok, sums / counts, np.nan)
    # convolution can leave a few ulps of drift outside the input range
    if ok.any():
        smoothed = np.clip(smoothed, values[ok].min(), values[ok].max())
    # report on the caller's axis
    keep = np.isin(daily.doy, series.doy)
    return Series(np.asarray(series.doy), smoothed[keep])


def _complete_rows(x: np.ndarray, p: int) -> np.ndarray:
    """Indices t whose value and ``p`` predecessors are all observed."""
    rows = np.arange(p, x.size)
    ok = np.isfinite(x[rows])
    for i in range(1, p + 1):
        ok &= np.isfinite(x[rows - i])
    return rows[ok]


def _lag_matrix(x, p, rows):
    design = np.empty((rows.size, p + 1))
    design[:, 0] = 1.0
    for i in range(1, p + 1):
        design[:, i] = x[rows - i]
    return design, x[rows]


def _variance_floor(target: np.ndarray) -> float:
    scale = float(np.max(np.abs(target))) if target.size else 1.0
    return max((1e-13 * scale) ** 2, np.finfo(float).tiny)


def _solve_ar(design, target, p) -> ArModel:
    n_eff = target.size
    if n_eff <= p + 1:
        raise InsufficientDataError(f"AR({p}) needs more than {p + 1} complete rows, got {n_eff}")
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < p + 1:
        raise RankError(f"AR({p}) design matrix has rank {rank} < {p + 1}")
    resid = target - design @ coef
    variance = max(float(resid @ resid) / n_eff, _variance_floor(target))
    aic = n_eff * np.log(variance) + 2 * (p + 1)
    return ArModel(p, coef[1:].copy(), float(coef[0]), variance, float(aic), n_eff)


def fit_ar(values, p: int) -> ArModel:
    """Conditional least-squares AR(p) fit with intercept.

    Rows whose target or any of its ``p`` lags is missing are skipped, so a
    series with gaps can be fitted directly.
    """
    if p < 0:
        raise ConfigError("AR order must be non-negative")
    x = np.asarray(values, dtype=float)
    design, target = _lag_matrix(x, p, _complete_rows(x, p))
    return _solve_ar(design, target, p)


def select_ar_order(values, p_max: int = DEFAULT_P_MAX) -> ArModel:
    """Fit AR(1)..AR(p_max) and keep the order with the lowest AIC.

    All candidate orders are scored on the same rows (those with ``p_max``
    complete lags) so their AIC values are comparable; the winner is then
    refitted on every row available to it. Ties go to the smaller order.
    Orders whose lagged design is rank deficient (e.g. noiseless data of a
    lower order) are skipped, as are orders whose refit is explosive
    (spectral radius above ``MAX_SPECTRAL_RADIUS``); near-deterministic
    smooth series otherwise favour high orders that diverge when filling.
    """
    if p_max < 1:
        raise ConfigError("p_max must be at least 1")
    x = np.asarray(values, dtype=float)
    rows = _complete_rows(x, p_max)
    ranked, first_err = [], None
    for p in range(1, p_max + 1):
        try:
            model = _solve_ar(*_lag_matrix(x, p, rows), p)
        except RankError as err:
            first_err = first_err or err
            continue
        ranked.append((model.aic, p))
    if not ranked:
        raise first_err
    for _, p in sorted(ranked):
        model = fit_ar(x, p)
        if model.spectral_radius <= MAX_SPECTRAL_RADIUS:
            return model
    raise InsufficientDataError(f"no stable AR order up to {p_max}")


def gapfill(values, model: ArModel) -> np.ndarray:
    """Fill missing samples by forward recursive AR prediction.

    Observed samples are returned untouched.
    """
    x = np.array(values, dtype=float)
    missing = ~np.isfinite(x)
    if not missing.any():
        return x
    p = model.order
    first = int(np.argmax(missing))
    if first < p:
        raise HeadGapError(f"first gap at index {first} has fewer than {p} samples of history")
    phi = np.asarray(model.coefficients, dtype=float)
    for t in np.flatnonzero(missing):
        # lags in order x[t-1], x[t-2], ...
        history = x[t - p:t][::-1] if p else np.empty(0)
        x[t] = model.intercept + float(phi @ history)
    return x


def screen_dynamic_range(
    series: Series, threshold: int = DEFAULT_MIN_GAP_DAYS, pixel_id: str = ""
) -> ScreeningReport:
    """Drop series whose minimum and maximum are fewer than ``threshold`` days apart."""
    values = np.asarray(series.values, dtype=float)
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise DataError("dynamic-range screen needs a gap-free series")
    doy = np.asarray(series.doy)
    gap = int(abs(doy[int(np.argmax(values))] - doy[int(np.argmin(values))]))
    dropped = gap < threshold
    return ScreeningReport(pixel_id, dropped, "short_dynamic_range" if dropped else "none", gap)


def preprocess_vod_pixel(
    pixel: PixelSeries,
    window: int = DEFAULT_WINDOW,
    p_max: int = DEFAULT_P_MAX,
    min_gap_days: int = DEFAULT_MIN_GAP_DAYS,
) -> tuple[Series | None, ScreeningReport]:
    """Run the full chain on one daily pixel; returns ``(None, report)`` if dropped."""
    masked = screen_frozen(pixel)
    daily = _as_daily(masked.series)
    if not np.isfinite(daily.values).any():
        return None, ScreeningReport(pixel.pixel_id, True, "frozen_flagged", 0)
    smoothed = moving_average(daily, window)
    values = smoothed.values
    if not np.all(np.isfinite(values)):
        # candidate orders cannot exceed the history before the first gap
        p_cap = min(p_max, int(np.argmax(~np.isfinite(values))))
        if p_cap < 1:
            log.info("pixel %s dropped: gap at series head", pixel.pixel_id)
            return None, ScreeningReport(pixel.pixel_id, True, "insufficient_data", 0)
        try:
            model = select_ar_order(values, p_cap)
            values = gapfill(values, model)
        except HeadGapError:
            log.info("pixel %s dropped: gap at series head", pixel.pixel_id)
            return None, ScreeningReport(pixel.pixel_id, True, "insufficient_data", 0)
        except (InsufficientDataError, RankError) as err:
            log.info("pixel %s dropped: %s", pixel.pixel_id, err)
            return None, ScreeningReport(pixel.pixel_id, True, "insufficient_data", 0)
    filled = Series(smoothed.doy, values)
    report = screen_dynamic_range(filled, min_gap_days, pixel.pixel_id)
    if report.dropped:
        return None, report
    return filled, report


def fill_composites(series: Series) -> Series:
    """Linearly interpolate missing optical composites from their neighbours."""
    doy = np.asarray(series.doy, dtype=float)
    values = np.asarray(series.values, dtype=float)
    ok = np.isfinite(values)
    if not ok.any():
        raise InsufficientDataError("no usable composites")
    if ok.all():
        return Series(np.asarray(series.doy), values.copy())
    return Series(np.asarray(series.doy), np.interp(doy, doy[ok], values[ok]))

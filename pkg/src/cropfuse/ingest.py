"""Survey handling, pixel-to-county aggregation and feature assembly."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    DataError,
    DimensionError,
    EmptyCountyError,
    MissingConversionError,
    UndefinedYieldError,
)

KG_PER_LB = 0.45359237
M2_PER_ACRE = 4046.8564224

EVI_LENGTH = 13
VOD_LENGTH = 213

# lb per bushel (USDA standard weights)
DEFAULT_BUSHEL_WEIGHTS = {
    "corn": 56.0,
    "soybean": 60.0,
    "wheat": 60.0,
    "oats": 32.0,
    "barley": 48.0,
    "sorghum": 56.0,
    "flaxseed": 56.0,
}

_UNIT_ALIASES = {
    "bu_per_acre": "bu_per_acre",
    "bu_acre": "bu_per_acre",
    "bu/acre": "bu_per_acre",
    "lb_per_acre": "lb_per_acre",
    "lb_acre": "lb_per_acre",
    "lb/acre": "lb_per_acre",
}


def normalize_unit(unit: str) -> str:
    try:
        return _UNIT_ALIASES[unit.strip().lower()]
    except KeyError:
        raise DataError(f"unknown yield unit {unit!r}") from None


def normalize_crop(name: str) -> str:
    name = name.strip().lower()
    # survey tables use the plural
    if name == "soybeans":
        return "soybean"
    return name


@dataclass
class UnitTable:
    """Bushel weights in lb per bushel, keyed by crop name."""

    pounds_per_bushel: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_BUSHEL_WEIGHTS)
    )

    def __post_init__(self):
        self.pounds_per_bushel = {
            normalize_crop(k): float(v) for k, v in self.pounds_per_bushel.items()
        }
        bad = {k: v for k, v in self.pounds_per_bushel.items() if not v > 0}
        if bad:
            raise DataError(f"bushel weights must be positive: {bad}")

    def updated(self, overrides: Mapping[str, float]) -> "UnitTable":
        merged = dict(self.pounds_per_bushel)
        merged.update({normalize_crop(k): float(v) for k, v in overrides.items()})
        return UnitTable(merged)


def convert_yield(
    yield_native: float, unit: str, crop: str, table: UnitTable | None = None
) -> float:
    """Convert a survey yield to kg m^-2.

    Parameters
    ----------
    yield_native : float
        Yield in bushels per acre or pounds per acre.
    unit : str
        ``bu_per_acre`` / ``lb_per_acre`` (CSV spellings ``bu_acre`` and
        ``lb_acre`` are accepted too).
    crop : str
        Crop name, used to look up the bushel weight.
    table : UnitTable, optional
        Bushel weights; defaults to the USDA standard weights.
    """
    if not np.isfinite(yield_native) or yield_native < 0:
        raise DataError(f"yield must be a non-negative number, got {yield_native}")
    unit = normalize_unit(unit)
    if unit == "lb_per_acre":
        return yield_native * KG_PER_LB / M2_PER_ACRE
    table = table or UnitTable()
    crop = normalize_crop(crop)
    if crop not in table.pounds_per_bushel:
        raise MissingConversionError(f"no bushel weight for crop {crop!r}")
    return yield_native * (table.pounds_per_bushel[crop] * KG_PER_LB) / M2_PER_ACRE


def weighted_county_yield(crops: Iterable[tuple[float, float]]) -> float:
    """Area-weighted mean yield of ``(yield_kg_m2, area_planted)`` pairs."""
    arr = np.asarray(list(crops), dtype=float).reshape(-1, 2)
    yields, areas = arr[:, 0], arr[:, 1]
    if np.any(areas < 0):
        raise DataError("planted area must be non-negative")
    total = areas.sum()
    if not total > 0:
        raise UndefinedYieldError("total planted area is zero")
    return float(np.dot(yields, areas) / total)


@dataclass
class CropReport:
    crop: str
    yield_native: float
    native_unit: str
    area_planted: float


@dataclass
class CountyRecord:
    county_id: str
    year: int
    crops: list[CropReport]
    weighted_yield: float
    proportions: dict[str, float]
    crop_yields: dict[str, float]

    @property
    def areas(self) -> dict[str, float]:
        """Planted acres per (normalized) crop."""
        return {normalize_crop(c.crop): float(c.area_planted) for c in self.crops}


def build_county_record(
    county_id: str, year: int, crops: Sequence[CropReport], table: UnitTable | None = None
) -> CountyRecord:
    """Convert each crop's yield and derive proportions and the weighted yield.

    Crops reported with zero planted area still appear in ``crop_yields`` but
    get proportion 0.
    """
    table = table or UnitTable()
    converted = {}
    areas = {}
    for c in crops:
        if c.area_planted < 0:
            raise DataError(f"{county_id}: negative area for {c.crop}")
        name = normalize_crop(c.crop)
        if name in converted:
            raise DataError(f"{county_id}/{year}: crop {name!r} reported twice")
        converted[name] = convert_yield(c.yield_native, c.native_unit, name, table)
        areas[name] = float(c.area_planted)
    total = sum(areas.values())
    if total > 0:
        proportions = {k: v / total for k, v in areas.items()}
    else:
        proportions = {k: 0.0 for k in areas}
    weighted = weighted_county_yield((converted[k], areas[k]) for k in converted)
    return CountyRecord(
        county_id=county_id,
        year=int(year),
        crops=list(crops),
        weighted_yield=weighted,
        proportions=proportions,
        crop_yields=converted,
    )


def scenario_label(record: CountyRecord, scenario: str) -> float | None:
    """Yield target for a scenario, or None if the county does not grow the crop."""
    if scenario == "total":
        return record.weighted_yield
    crop = normalize_crop(scenario)
    if record.proportions.get(crop, 0.0) > 0:
        return record.crop_yields[crop]
    return None


# -- geometry -----------------------------------------------------------------


@dataclass
class CountyGeometry:
    """County outline as one or more polygons, each a list of closed rings.

    ``polygons[k][0]`` is the outer ring of part ``k``; further rings are
    holes. Each ring is an ``(n, 2)`` array of (lon, lat) with the first
    vertex repeated at the end.
    """

    county_id: str
    polygons: list[list[np.ndarray]]

    def __post_init__(self):
        checked = []
        for poly in self.polygons:
            rings = []
            for ring in poly:
                ring = np.asarray(ring, dtype=float)
                if ring.ndim != 2 or ring.shape[1] != 2 or len(ring) < 4:
                    raise DataError(f"{self.county_id}: ring needs >= 3 distinct vertices")
                if not np.array_equal(ring[0], ring[-1]):
                    raise DataError(f"{self.county_id}: ring is not closed")
                rings.append(ring)
            checked.append(rings)
        self.polygons = checked


def _on_ring_boundary(px, py, ring, eps=1e-12):
    x1, y1 = ring[:-1, 0][:, None], ring[:-1, 1][:, None]
    x2, y2 = ring[1:, 0][:, None], ring[1:, 1][:, None]
    cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    seg_len = np.hypot(x2 - x1, y2 - y1)
    in_box = (
        (px >= np.minimum(x1, x2) - eps)
        & (px <= np.maximum(x1, x2) + eps)
        & (py >= np.minimum(y1, y2) - eps)
        & (py <= np.maximum(y1, y2) + eps)
    )
    return np.any((np.abs(cross) <= eps * np.maximum(seg_len, 1.0)) & in_box, axis=0)


def _ring_crossings(px, py, ring):
    x1, y1 = ring[:-1, 0][:, None], ring[:-1, 1][:, None]
    x2, y2 = ring[1:, 0][:, None], ring[1:, 1][:, None]
    straddle = (y1 > py) != (y2 > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
    hits = straddle & (px < x_cross)
    return np.count_nonzero(hits, axis=0)


def points_in_geometry(lon, lat, geometry: CountyGeometry) -> np.ndarray:
    """Even-odd containment test; points on any ring boundary count as inside."""
    px = np.atleast_1d(np.asarray(lon, dtype=float))[None, :]
    py = np.atleast_1d(np.asarray(lat, dtype=float))[None, :]
    inside = np.zeros(px.shape[1], dtype=bool)
    for poly in geometry.polygons:
        crossings = np.zeros(px.shape[1], dtype=int)
        boundary = np.zeros(px.shape[1], dtype=bool)
        for ring in poly:
            crossings += _ring_crossings(px, py, ring)
            boundary |= _on_ring_boundary(px, py, ring)
        inside |= (crossings % 2 == 1) | boundary
    return inside


# -- pixel series -------------------------------------------------------------


class Series(NamedTuple):
    """A time series on a day-of-year axis; NaN marks a missing sample."""

    doy: np.ndarray
    values: np.ndarray


@dataclass
class PixelSeries:
    pixel_id: str
    lon: float
    lat: float
    doy: np.ndarray
    values: np.ndarray
    quality: np.ndarray
    is_cropland: bool = True
    sensor: str = "VOD"

    def __post_init__(self):
        self.doy = np.asarray(self.doy, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        self.quality = np.asarray(self.quality, dtype=bool)
        if not (self.doy.shape == self.values.shape == self.quality.shape):
            raise DimensionError(f"pixel {self.pixel_id}: mismatched sample arrays")
        if np.any(np.diff(self.doy) <= 0):
            raise DataError(f"pixel {self.pixel_id}: day_of_year must be strictly increasing")
        if not (-180 <= self.lon <= 180 and -90 <= self.lat <= 90):
            raise DataError(f"pixel {self.pixel_id}: coordinates out of range")
        if not np.all(np.isfinite(self.values[self.quality])):
            raise DataError(f"pixel {self.pixel_id}: non-finite value flagged usable")

    @property
    def series(self) -> Series:
        return Series(self.doy, np.where(self.quality, self.values, np.nan))


def assign_pixels_to_counties(
    pixels: Sequence[PixelSeries], counties: Sequence[CountyGeometry]
) -> dict[str, list[str]]:
    """Map each cropland pixel to the county enclosing its centroid.

    Pixels are deduplicated by ``pixel_id`` (EVI and VOD rows share a
    location). When a centroid sits on a shared border the county with the
    smallest id wins, so every pixel lands in at most one county.
    """
    seen = {}
    for p in pixels:
        if p.is_cropland and p.pixel_id not in seen:
            seen[p.pixel_id] = (p.lon, p.lat)
    ids = list(seen)
    result = {c.county_id: [] for c in counties}
    if not ids:
        return result
    lon = np.array([seen[i][0] for i in ids])
    lat = np.array([seen[i][1] for i in ids])
    free = np.ones(len(ids), dtype=bool)
    for county in sorted(counties, key=lambda c: c.county_id):
        hit = free & points_in_geometry(lon, lat, county)
        result[county.county_id] = [ids[k] for k in np.flatnonzero(hit)]
        free &= ~hit
    return result


def county_mean_series(pixels: Sequence[PixelSeries | Series]) -> Series:
    """Per-timestep mean over usable pixels.

    Timesteps where no pixel is usable are dropped from the result.
    """
    if len(pixels) == 0:
        raise EmptyCountyError("no pixels to average")
    series = [p.series if isinstance(p, PixelSeries) else Series(*p) for p in pixels]
    doy = np.asarray(series[0].doy)
    for s in series[1:]:
        if not np.array_equal(np.asarray(s.doy), doy):
            raise DimensionError("pixels do not share a time axis")
    stack = np.vstack([np.asarray(s.values, dtype=float) for s in series])
    usable = np.isfinite(stack)
    counts = usable.sum(axis=0)
    sums = np.where(usable, stack, 0.0).sum(axis=0)
    keep = counts > 0
    return Series(doy[keep], sums[keep] / counts[keep])


# -- features -----------------------------------------------------------------


@dataclass
class FeatureVector:
    county_id: str
    features: np.ndarray
    label: float
    year: int


def stack_features(
    evi: Sequence[float],
    vod: Sequence[float],
    evi_length: int | None = EVI_LENGTH,
    vod_length: int | None = VOD_LENGTH,
) -> np.ndarray:
    """Concatenate optical then microwave series into one feature vector.

    Pass ``None`` for a length to skip its check (truncated windows).
    """
    evi = np.asarray(evi, dtype=float).ravel()
    vod = np.asarray(vod, dtype=float).ravel()
    if evi_length is not None and evi.size != evi_length:
        raise DimensionError(f"EVI series has {evi.size} samples, expected {evi_length}")
    if vod_length is not None and vod.size != vod_length:
        raise DimensionError(f"VOD series has {vod.size} samples, expected {vod_length}")
    out = np.concatenate([evi, vod])
    if not np.all(np.isfinite(out)):
        raise DataError("stacked features contain non-finite values")
    return out


@dataclass
class FeatureSet:
    """Rows of a regression problem with their (county, year) identity."""

    county_ids: list[str]
    years: np.ndarray
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.years = np.asarray(self.years, dtype=int).ravel()
        n = len(self.county_ids)
        if not (self.X.shape[0] == self.y.size == self.years.size == n):
            raise DimensionError("feature set rows are inconsistent")

    def __len__(self):
        return len(self.county_ids)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_vectors(cls, vectors: Sequence[FeatureVector]) -> "FeatureSet":
        if not vectors:
            return cls([], np.zeros(0, int), np.zeros((0, 0)), np.zeros(0))
        sizes = {np.asarray(v.features).size for v in vectors}
        if len(sizes) != 1:
            raise DimensionError(f"inconsistent feature lengths {sorted(sizes)}")
        return cls(
            [v.county_id for v in vectors],
            np.array([v.year for v in vectors]),
            np.vstack([np.asarray(v.features, dtype=float) for v in vectors]),
            np.array([v.label for v in vectors]),
        )

    def vectors(self) -> list[FeatureVector]:
        return [
            FeatureVector(c, self.X[i].copy(), float(self.y[i]), int(self.years[i]))
            for i, c in enumerate(self.county_ids)
        ]

    def subset(self, index) -> "FeatureSet":
        index = np.asarray(index)
        return FeatureSet(
            [self.county_ids[i] for i in index], self.years[index], self.X[index], self.y[index]
        )


def pool_years(datasets: Sequence[FeatureSet]) -> FeatureSet:
    """Row-wise concatenation of per-year datasets."""
    datasets = [d for d in datasets if len(d)]
    if not datasets:
        raise DataError("nothing to pool")
    widths = {d.n_features for d in datasets}
    if len(widths) != 1:
        raise DimensionError(f"years disagree on feature length: {sorted(widths)}")
    ids = [c for d in datasets for c in d.county_ids]
    years = np.concatenate([d.years for d in datasets])
    keys = list(zip(ids, years.tolist()))
    if len(set(keys)) != len(keys):
        raise DataError("duplicate (county_id, year) rows when pooling")
    return FeatureSet(
        ids, years, np.vstack([d.X for d in datasets]), np.concatenate([d.y for d in datasets])
    )

"""Readers and writers for the CSV / GeoJSON / TOML exchange formats."""

from __future__ import annotations

import csv
import json
import math
import sys
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, DataError
from .ingest import CountyGeometry, CropReport, PixelSeries, UnitTable
from .metrics import SeasonWindow
from .preprocess import ScreeningReport

PIXEL_COLUMNS = ("pixel_id", "lon", "lat", "sensor", "doy", "value", "quality", "is_cropland")
SURVEY_COLUMNS = ("county_id", "year", "crop", "yield_value", "yield_unit", "area_planted_acres")
SEASON_COLUMNS = ("county_id", "start_doy", "end_doy")
SCREENING_COLUMNS = ("pixel_id", "dropped", "reason", "min_max_gap_days")
SENSORS = ("EVI", "VOD")


def fmt(value) -> str:
    """Shortest round-trip text for numbers; booleans as 0/1."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return repr(value)
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path, required: Sequence[str]) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        return list(reader)


def _float(text: str, what: str) -> float:
    text = text.strip()
    if text == "" or text.lower() == "nan":
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise DataError(f"bad number for {what}: {text!r}") from None


def _flag(text: str, what: str) -> bool:
    text = text.strip()
    if text not in ("0", "1"):
        raise DataError(f"{what} must be 0 or 1, got {text!r}")
    return text == "1"


# -- pixels -------------------------------------------------------------------


def read_pixels(path) -> list[PixelSeries]:
    rows = read_csv(path, PIXEL_COLUMNS)
    groups: dict[tuple[str, str], list[dict]] = defaultdict(list)
    for r in rows:
        sensor = r["sensor"].strip().upper()
        if sensor not in SENSORS:
            raise DataError(f"{path}: unknown sensor {r['sensor']!r}")
        groups[(r["pixel_id"].strip(), sensor)].append(r)
    out = []
    for (pid, sensor), recs in groups.items():
        recs.sort(key=lambda r: int(r["doy"]))
        first = recs[0]
        lon, lat = _float(first["lon"], "lon"), _float(first["lat"], "lat")
        crop = _flag(first["is_cropland"], "is_cropland")
        doy = [int(r["doy"]) for r in recs]
        values = [_float(r["value"], "value") for r in recs]
        quality = [_flag(r["quality"], "quality") for r in recs]
        # non-finite samples cannot be usable whatever the flag says
        quality = [q and math.isfinite(v) for q, v in zip(quality, values)]
        out.append(PixelSeries(pid, lon, lat, doy, values, quality, crop, sensor))
    return out


def write_pixels(path, pixels: Sequence[PixelSeries]) -> Path:
    def rows():
        for p in pixels:
            for d, v, q in zip(p.doy, p.values, p.quality):
                yield (p.pixel_id, p.lon, p.lat, p.sensor, int(d), float(v), bool(q), bool(p.is_cropland))

    return write_csv(path, PIXEL_COLUMNS, rows())


# -- survey -------------------------------------------------------------------


def read_survey(path) -> dict[tuple[str, int], list[CropReport]]:
    out: dict[tuple[str, int], list[CropReport]] = defaultdict(list)
    for r in read_csv(path, SURVEY_COLUMNS):
        key = (r["county_id"].strip(), int(r["year"]))
        out[key].append(
            CropReport(
                r["crop"].strip(),
                _float(r["yield_value"], "yield_value"),
                r["yield_unit"].strip(),
                _float(r["area_planted_acres"], "area_planted_acres"),
            )
        )
    return dict(out)


def write_survey(path, rows: Sequence[dict]) -> Path:
    return write_csv(path, SURVEY_COLUMNS, ([r[c] for c in SURVEY_COLUMNS] for r in rows))


# -- geometry -----------------------------------------------------------------


def _county_id(feature: dict) -> str:
    props = feature.get("properties") or {}
    for key in ("county_id", "GEOID", "fips", "FIPS"):
        if key in props:
            return str(props[key])
    if "id" in feature:
        return str(feature["id"])
    raise DataError("feature without county_id")


def read_counties(path) -> list[CountyGeometry]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    doc = json.loads(path.read_text())
    features = doc.get("features") if doc.get("type") == "FeatureCollection" else [doc]
    out = []
    for feat in features:
        geom = feat.get("geometry") or {}
        kind = geom.get("type")
        if kind == "Polygon":
            polys = [geom["coordinates"]]
        elif kind == "MultiPolygon":
            polys = geom["coordinates"]
        else:
            raise DataError(f"{path}: unsupported geometry type {kind!r}")
        out.append(CountyGeometry(_county_id(feat), [[np.asarray(r, float) for r in p] for p in polys]))
    return out


def write_counties(path, geometries: Sequence[CountyGeometry]) -> Path:
    feats = []
    for g in geometries:
        coords = [[ring.tolist() for ring in poly] for poly in g.polygons]
        geom = (
            {"type": "Polygon", "coordinates": coords[0]}
            if len(coords) == 1
            else {"type": "MultiPolygon", "coordinates": coords}
        )
        feats.append({"type": "Feature", "properties": {"county_id": g.county_id}, "geometry": geom})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"type": "FeatureCollection", "features": feats}))
    return path


# -- seasons, units, screening ------------------------------------------------


def read_seasons(path) -> dict[str, SeasonWindow]:
    return {
        r["county_id"].strip(): SeasonWindow(r["county_id"].strip(), int(r["start_doy"]), int(r["end_doy"]))
        for r in read_csv(path, SEASON_COLUMNS)
    }


def write_seasons(path, seasons: Sequence[SeasonWindow]) -> Path:
    return write_csv(path, SEASON_COLUMNS, ((s.county_id, s.start_doy, s.end_doy) for s in seasons))


def load_toml(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        return tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from err


def read_unit_table(path) -> UnitTable:
    """Bushel weights from ``[pounds_per_bushel]`` or top-level ``crop = lb`` pairs."""
    doc = load_toml(path)
    table = doc.get("pounds_per_bushel", doc)
    try:
        overrides = {k: float(v) for k, v in table.items()}
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{path}: bushel weights must be numbers") from err
    try:
        return UnitTable().updated(overrides)
    except DataError as err:
        raise ConfigError(str(err)) from err


def write_screening(path, reports: Sequence[ScreeningReport]) -> Path:
    return write_csv(
        path,
        SCREENING_COLUMNS,
        ((r.pixel_id, r.dropped, r.reason, r.min_max_gap_days) for r in reports),
    )

import math

import numpy as np
import pytest

from cropfuse.errors import ConfigError, DataError
from cropfuse.ingest import CountyGeometry, PixelSeries
from cropfuse.io import (
    fmt,
    load_toml,
    read_counties,
    read_csv,
    read_pixels,
    read_seasons,
    read_survey,
    read_unit_table,
    write_counties,
    write_csv,
    write_pixels,
    write_seasons,
    write_survey,
)
from cropfuse.metrics import SeasonWindow


class TestFmt:
    @pytest.mark.parametrize(
        "value, text",
        [(True, "1"), (np.bool_(False), "0"), (0.1, "0.1"), (np.float64(1 / 3), repr(1 / 3)), (np.int64(7), "7"), (math.nan, "nan"), ("x", "x")],
    )
    def test_examples(self, value, text):
        assert fmt(value) == text

    def test_float_round_trip(self, rng):
        for v in rng.normal(size=100):
            assert float(fmt(v)) == v


class TestCsv:
    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_csv(tmp_path / "nope.csv", ["a"])

    def test_missing_column(self, tmp_path):
        write_csv(tmp_path / "a.csv", ["a"], [[1]])
        with pytest.raises(DataError):
            read_csv(tmp_path / "a.csv", ["a", "b"])

    def test_unix_newlines(self, tmp_path):
        p = write_csv(tmp_path / "a.csv", ["a", "b"], [[1, 2.5]])
        assert p.read_bytes() == b"a,b\n1,2.5\n"


class TestPixels:
    def test_round_trip(self, tmp_path):
        px = [
            PixelSeries("p1", -93.5, 42.0, [91, 92, 93], [0.1, np.nan, 0.3], [True, False, True], True, "VOD"),
            PixelSeries("p1", -93.5, 42.0, [97, 113], [0.2, 0.4], [True, True], True, "EVI"),
        ]
        write_pixels(tmp_path / "p.csv", px)
        back = {(p.pixel_id, p.sensor): p for p in read_pixels(tmp_path / "p.csv")}
        vod = back[("p1", "VOD")]
        assert list(vod.doy) == [91, 92, 93] and list(vod.quality) == [True, False, True]
        assert np.array_equal(vod.values, px[0].values, equal_nan=True)
        assert back[("p1", "EVI")].lon == -93.5

    def test_nan_forces_unusable(self, tmp_path):
        (tmp_path / "p.csv").write_text(
            "pixel_id,lon,lat,sensor,doy,value,quality,is_cropland\np,0,0,VOD,2,0.2,1,1\np,0,0,vod,1,,1,1\n"
        )
        (p,) = read_pixels(tmp_path / "p.csv")
        assert list(p.doy) == [1, 2] and list(p.quality) == [False, True]

    @pytest.mark.parametrize("sensor, quality, value", [("NDVI", "1", "0.1"), ("VOD", "yes", "0.1"), ("VOD", "1", "abc")])
    def test_bad_rows(self, tmp_path, sensor, quality, value):
        (tmp_path / "p.csv").write_text(
            f"pixel_id,lon,lat,sensor,doy,value,quality,is_cropland\np,0,0,{sensor},1,{value},{quality},1\n"
        )
        with pytest.raises(DataError):
            read_pixels(tmp_path / "p.csv")


class TestSurvey:
    def test_round_trip(self, tmp_path):
        rows = [
            dict(county_id="19001", year=2015, crop="corn", yield_value=180.5, yield_unit="bu_acre", area_planted_acres=1e5),
            dict(county_id="19001", year=2015, crop="soybean", yield_value=55.0, yield_unit="bu_acre", area_planted_acres=5e4),
        ]
        write_survey(tmp_path / "s.csv", rows)
        out = read_survey(tmp_path / "s.csv")
        assert list(out) == [("19001", 2015)]
        assert [c.crop for c in out[("19001", 2015)]] == ["corn", "soybean"]
        assert out[("19001", 2015)][0].yield_native == 180.5


class TestCounties:
    def test_round_trip(self, tmp_path):
        sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]], float)
        g = [CountyGeometry("a", [[sq]]), CountyGeometry("b", [[sq + 2], [sq + 4]])]
        write_counties(tmp_path / "c.geojson", g)
        back = read_counties(tmp_path / "c.geojson")
        assert [b.county_id for b in back] == ["a", "b"]
        assert len(back[1].polygons) == 2 and np.array_equal(back[1].polygons[1][0], sq + 4)

    def test_id_fallbacks(self, tmp_path):
        sq = [[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]
        (tmp_path / "c.geojson").write_text(
            '{"type":"Feature","id":17,"properties":{},"geometry":{"type":"Polygon","coordinates":[%s]}}' % sq
        )
        assert read_counties(tmp_path / "c.geojson")[0].county_id == "17"

    def test_unsupported_geometry(self, tmp_path):
        (tmp_path / "c.geojson").write_text(
            '{"type":"Feature","properties":{"county_id":"a"},"geometry":{"type":"Point","coordinates":[0,0]}}'
        )
        with pytest.raises(DataError):
            read_counties(tmp_path / "c.geojson")


class TestSeasonsAndToml:
    def test_seasons_round_trip(self, tmp_path):
        write_seasons(tmp_path / "s.csv", [SeasonWindow("a", 100, 250)])
        assert read_seasons(tmp_path / "s.csv")["a"] == SeasonWindow("a", 100, 250)

    def test_toml_errors(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_toml(tmp_path / "x.toml")
        (tmp_path / "x.toml").write_text("a = [")
        with pytest.raises(ConfigError):
            load_toml(tmp_path / "x.toml")

    def test_unit_table(self, tmp_path):
        (tmp_path / "u.toml").write_text("[pounds_per_bushel]\ncorn = 50.0\n")
        assert read_unit_table(tmp_path / "u.toml").pounds_per_bushel["corn"] == 50.0
        (tmp_path / "v.toml").write_text('corn = "heavy"\n')
        with pytest.raises(ConfigError):
            read_unit_table(tmp_path / "v.toml")

import json

import pytest
from shapely.geometry import Polygon, mapping

from roofclass.errors import FootprintError
from roofclass.geodata import Footprint, FootprintSet, load_footprints, save_footprints
from roofclass.geodata.footprints import normalize_country


def square(x, y, side=10.0):
    return Polygon([(x, y), (x + side, y), (x + side, y + side), (x, y + side)])


def write_collection(path, features):
    with open(path, "w") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh)


def feature(bid, poly, country=None):
    props = {"building_id": bid}
    if country is not None:
        props["country"] = country
    return {"type": "Feature", "geometry": mapping(poly), "properties": props}


class TestNormalizeCountry:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("Dominica", "Dominica"),
            ("dominica", "Dominica"),
            ("Saint Lucia", "SaintLucia"),
            ("saint_lucia", "SaintLucia"),
            ("St. Lucia", "SaintLucia"),
            ("France", "Other"),
            (None, "Other"),
        ],
    )
    def test_mapping(self, raw, expected):
        assert normalize_country(raw) == expected


class TestFootprintValidation:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(FootprintError, match="duplicate"):
            FootprintSet([Footprint("a", square(0, 0)), Footprint("a", square(20, 0))])

    def test_self_intersecting_rejected(self):
        bowtie = Polygon([(0, 0), (2, 2), (2, 0), (0, 2)])
        with pytest.raises(FootprintError, match="self-intersecting"):
            Footprint("bad", bowtie)

    def test_zero_area_rejected(self):
        line = Polygon([(0, 0), (1, 0), (2, 0)])
        with pytest.raises(FootprintError):
            Footprint("flat", line)


class TestGeoJsonIO:
    def test_roundtrip(self, tmp_path):
        fs = FootprintSet(
            [
                Footprint("b1", square(0, 0), "Dominica"),
                Footprint("b2", square(30, 40), "SaintLucia"),
            ]
        )
        p = save_footprints(fs, tmp_path / "fp.geojson")
        back = load_footprints(p)
        assert len(back) == 2
        assert back.by_id("b2").country_tag == "SaintLucia"
        assert back.by_id("b1").polygon.equals(square(0, 0))

    def test_missing_building_id(self, tmp_path):
        p = tmp_path / "bad.geojson"
        write_collection(p, [{"type": "Feature", "geometry": mapping(square(0, 0)), "properties": {}}])
        with pytest.raises(FootprintError, match="building_id"):
            load_footprints(p)

    def test_non_polygon_rejected(self, tmp_path):
        p = tmp_path / "pt.geojson"
        write_collection(
            p,
            [
                {
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": [0.0, 0.0]},
                    "properties": {"building_id": "x"},
                }
            ],
        )
        with pytest.raises(FootprintError, match="Polygon"):
            load_footprints(p)

    def test_country_counts(self, tmp_path):
        p = tmp_path / "fp.geojson"
        write_collection(
            p,
            [
                feature("a", square(0, 0), "Dominica"),
                feature("b", square(20, 0), "Dominica"),
                feature("c", square(40, 0), "Saint Lucia"),
                feature("d", square(60, 0)),
            ],
        )
        counts = load_footprints(p).country_counts()
        assert counts == {"Dominica": 2, "SaintLucia": 1, "Other": 1}

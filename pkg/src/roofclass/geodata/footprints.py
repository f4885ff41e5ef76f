"""Building footprint polygons and their GeoJSON representation.

Footprints arrive as a GeoJSON FeatureCollection in a projected CRS
(meters) with a `building_id` property and an optional `country` property.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from shapely.geometry import Polygon, mapping, shape

from roofclass.errors import FootprintError

COUNTRY_TAGS = ("Dominica", "SaintLucia", "Other")

_COUNTRY_ALIASES = {
    "dominica": "Dominica",
    "saintlucia": "SaintLucia",
    "stlucia": "SaintLucia",
}


def normalize_country(value: str | None) -> str:
    """Map free-form country names onto the canonical tags."""
    if not value:
        return "Other"
    key = "".join(ch for ch in str(value).lower() if ch.isalnum())
    return _COUNTRY_ALIASES.get(key, "Other")


@dataclass(frozen=True)
class Footprint:
    building_id: str
    polygon: Polygon
    country_tag: str = "Other"

    def __post_init__(self):
        if self.country_tag not in COUNTRY_TAGS:
            raise FootprintError(f"unknown country tag {self.country_tag!r}")
        if not isinstance(self.polygon, Polygon):
            raise FootprintError(
                f"footprint {self.building_id}: expected Polygon geometry, got "
                f"{type(self.polygon).__name__}"
            )
        if not self.polygon.is_valid:
            raise FootprintError(f"footprint {self.building_id}: self-intersecting polygon")
        if self.polygon.area <= 0:
            raise FootprintError(f"footprint {self.building_id}: polygon has no area")


@dataclass
class FootprintSet:
    features: list[Footprint] = field(default_factory=list)

    def __post_init__(self):
        seen: set[str] = set()
        for f in self.features:
            if f.building_id in seen:
                raise FootprintError(f"duplicate building_id {f.building_id!r}")
            seen.add(f.building_id)

    def __len__(self) -> int:
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def by_id(self, building_id: str) -> Footprint:
        for f in self.features:
            if f.building_id == building_id:
                return f
        raise KeyError(building_id)

    def country_counts(self) -> dict[str, int]:
        counts = {tag: 0 for tag in COUNTRY_TAGS}
        for f in self.features:
            counts[f.country_tag] += 1
        return counts


def load_footprints(path: str | os.PathLike) -> FootprintSet:
    """Read footprints from a GeoJSON FeatureCollection.

    Every feature must carry a `building_id` property; `country` is
    optional and normalized (unknown values become "Other").
    """
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise FootprintError(f"{path}: expected a GeoJSON FeatureCollection")

    features = []
    for i, feat in enumerate(doc.get("features", [])):
        props = feat.get("properties") or {}
        if "building_id" not in props or props["building_id"] in (None, ""):
            raise FootprintError(f"{path}: feature {i} is missing the 'building_id' property")
        geom = shape(feat.get("geometry") or {})
        if not isinstance(geom, Polygon):
            raise FootprintError(
                f"{path}: feature {props['building_id']} has geometry type "
                f"{geom.geom_type}, only Polygon is supported"
            )
        features.append(
            Footprint(
                building_id=str(props["building_id"]),
                polygon=geom,
                country_tag=normalize_country(props.get("country")),
            )
        )
    return FootprintSet(features)


def save_footprints(footprints: FootprintSet, path: str | os.PathLike) -> Path:
    """Write footprints back out as a GeoJSON FeatureCollection."""
    path = Path(path)
    doc = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": mapping(f.polygon),
                "properties": {"building_id": f.building_id, "country": f.country_tag},
            }
            for f in footprints
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return path

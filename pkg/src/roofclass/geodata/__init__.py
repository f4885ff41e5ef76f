"""Georeferenced rasters, footprint polygons, nDSM derivation and tile sampling."""

from roofclass.geodata.raster import RasterGrid, compute_ndsm, resample
from roofclass.geodata.geotiff import load_raster, write_raster
from roofclass.geodata.footprints import Footprint, FootprintSet, load_footprints, save_footprints
from roofclass.geodata.tiles import TileSpec, sample_tiles

__all__ = [
    "RasterGrid",
    "compute_ndsm",
    "resample",
    "load_raster",
    "write_raster",
    "Footprint",
    "FootprintSet",
    "load_footprints",
    "save_footprints",
    "TileSpec",
    "sample_tiles",
]

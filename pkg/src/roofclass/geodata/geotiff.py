"""GeoTIFF-convention raster files read and written through Pillow.

Only the subset this pipeline needs is supported: uncompressed north-up
rasters, square cells, single-band float32 or 3-band uint8/float32, with
the standard georeferencing tags (ModelPixelScale, ModelTiepoint, GeoKey
directory for the CRS, GDAL nodata). Rotated geotransforms and exotic
band layouts are rejected with a diagnostic rather than guessed at.
"""

from __future__ import annotations

import math
import os
from pathlib import Path

import numpy as np
from PIL import Image, TiffImagePlugin

from roofclass.errors import RasterFormatError, UngeoreferencedRaster
from roofclass.geodata.raster import RasterGrid

TAG_MODEL_PIXEL_SCALE = 33550
TAG_MODEL_TIEPOINT = 33922
TAG_MODEL_TRANSFORMATION = 34264
TAG_GEO_KEY_DIRECTORY = 34735
TAG_GEO_ASCII_PARAMS = 34737
TAG_GDAL_NODATA = 42113

GEOKEY_MODEL_TYPE = 1024
GEOKEY_PROJECTED_CS = 3072
GEOKEY_PCS_CITATION = 3073

Image.MAX_IMAGE_PIXELS = None  # survey rasters are large; size is caller's concern


def _build_geo_tags(grid: RasterGrid) -> TiffImagePlugin.ImageFileDirectory_v2:
    info = TiffImagePlugin.ImageFileDirectory_v2()
    info[TAG_MODEL_PIXEL_SCALE] = (grid.cell_size, grid.cell_size, 0.0)
    info[TAG_MODEL_TIEPOINT] = (0.0, 0.0, 0.0, grid.origin[0], grid.origin[1], 0.0)

    keys = [GEOKEY_MODEL_TYPE, 0, 1, 1]  # projected model
    ascii_params = ""
    crs = grid.crs_id.strip()
    if crs.upper().startswith("EPSG:"):
        code = int(crs.split(":", 1)[1])
        keys += [GEOKEY_PROJECTED_CS, 0, 1, code]
    ascii_params = crs + "|"
    keys += [GEOKEY_PCS_CITATION, TAG_GEO_ASCII_PARAMS, len(ascii_params), 0]
    n_keys = len(keys) // 4
    info[TAG_GEO_KEY_DIRECTORY] = tuple([1, 1, 0, n_keys] + keys)
    info[TAG_GEO_ASCII_PARAMS] = ascii_params

    if grid.nodata is not None:
        info[TAG_GDAL_NODATA] = repr(float(grid.nodata))
    return info


def write_raster(grid: RasterGrid, path: str | os.PathLike, storage: str = "auto") -> Path:
    """Write a RasterGrid as a GeoTIFF-convention file.

    storage: "auto" stores 3-band grids as uint8 when all values are
    integral within [0, 255] (the orthophoto case) and float32 otherwise;
    "uint8" / "float32" force the respective layout. Multi-band float32
    is stored one band per page.
    """
    path = Path(path)
    info = _build_geo_tags(grid)

    values = grid.values
    if storage == "auto":
        integral = bool(
            np.isfinite(values).all()
            and (values >= 0).all()
            and (values <= 255).all()
            and np.array_equal(values, np.rint(values))
        )
        storage = "uint8" if (grid.bands == 3 and integral) else "float32"
    if storage not in ("uint8", "float32"):
        raise ValueError(f"unknown storage {storage!r}")

    if grid.bands == 3 and storage == "uint8":
        rgb = np.transpose(values, (1, 2, 0)).astype(np.uint8)
        Image.fromarray(rgb, mode="RGB").save(path, tiffinfo=info)
    elif grid.bands == 1:
        Image.fromarray(values[0].astype(np.float32), mode="F").save(path, tiffinfo=info)
    else:
        pages = [Image.fromarray(values[b].astype(np.float32), mode="F") for b in range(grid.bands)]
        pages[0].save(path, tiffinfo=info, save_all=True, append_images=pages[1:])
    return path


def _page_to_band(img: Image.Image) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise RasterFormatError(f"unexpected page layout {arr.shape} in raster file")
    return arr.astype(np.float32)


def _parse_crs(tags) -> str | None:
    directory = tags.get(TAG_GEO_KEY_DIRECTORY)
    ascii_params = tags.get(TAG_GEO_ASCII_PARAMS, "")
    if directory is None:
        return None
    entries = list(directory)
    citation = None
    for i in range(4, len(entries) - 3, 4):
        key, location, count, value = entries[i : i + 4]
        if key == GEOKEY_PROJECTED_CS and location == 0:
            return f"EPSG:{value}"
        if key == GEOKEY_PCS_CITATION and location == TAG_GEO_ASCII_PARAMS:
            chunk = ascii_params[value : value + count]
            citation = chunk.rstrip("|").strip() or None
    return citation


def load_raster(path: str | os.PathLike) -> RasterGrid:
    """Read a georeferenced raster file into a RasterGrid.

    Raises FileNotFoundError for missing files, UngeoreferencedRaster when
    geotransform or CRS tags are absent, RasterFormatError for unsupported
    band counts or layouts.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"raster file not found: {path}")

    with Image.open(path) as img:
        tags = getattr(img, "tag_v2", None)
        if tags is None or TAG_MODEL_PIXEL_SCALE not in tags or TAG_MODEL_TIEPOINT not in tags:
            if tags is not None and TAG_MODEL_TRANSFORMATION in tags:
                raise RasterFormatError(
                    f"{path}: general model transformations (rotation/shear) are unsupported"
                )
            raise UngeoreferencedRaster(f"ungeoreferenced raster: {path} lacks geotransform tags")

        scale = tags[TAG_MODEL_PIXEL_SCALE]
        tiepoint = tags[TAG_MODEL_TIEPOINT]
        if len(tiepoint) < 6 or tiepoint[0] != 0 or tiepoint[1] != 0:
            raise RasterFormatError(f"{path}: tiepoint not anchored at the raster origin")
        sx, sy = float(scale[0]), float(scale[1])
        if not (sx > 0 and sy > 0) or not math.isclose(sx, sy, rel_tol=1e-6):
            raise RasterFormatError(f"{path}: only square cells supported, got scale {scale}")
        origin = (float(tiepoint[3]), float(tiepoint[4]))

        crs = _parse_crs(tags)
        if not crs:
            raise UngeoreferencedRaster(f"ungeoreferenced raster: {path} lacks CRS metadata")

        nodata = None
        if TAG_GDAL_NODATA in tags:
            try:
                nodata = float(str(tags[TAG_GDAL_NODATA]).strip().strip("\x00"))
            except ValueError as exc:
                raise RasterFormatError(f"{path}: bad nodata tag {tags[TAG_GDAL_NODATA]!r}") from exc

        n_frames = getattr(img, "n_frames", 1)
        if n_frames > 1:
            bands = []
            for i in range(n_frames):
                img.seek(i)
                bands.append(_page_to_band(img))
            values = np.stack(bands)
        else:
            arr = np.asarray(img)
            if arr.ndim == 2:
                values = arr.astype(np.float32)[np.newaxis]
            elif arr.ndim == 3:
                values = np.transpose(arr, (2, 0, 1)).astype(np.float32)
            else:
                raise RasterFormatError(f"{path}: unsupported array layout {arr.shape}")

    if values.shape[0] not in (1, 3):
        raise RasterFormatError(
            f"{path}: unsupported band count {values.shape[0]} (expected 1 elevation or 3 RGB)"
        )
    return RasterGrid(values=values, cell_size=sx, origin=origin, crs_id=crs, nodata=nodata)

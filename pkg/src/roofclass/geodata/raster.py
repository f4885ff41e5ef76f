"""In-memory raster grid, nDSM derivation and resampling.

Grids are band-major float32 arrays with square cells in a projected CRS.
The origin is the outer corner of the top-left cell; y decreases with row
index (north-up convention).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from roofclass.errors import GeometryMismatch, RasterFormatError

RESAMPLE_METHODS = ("nearest", "bilinear")


@dataclass(frozen=True)
class RasterGrid:
    """Georeferenced single- or multi-band grid.

    values: float32 array of shape (bands, height, width)
    cell_size: meters per pixel (square cells)
    origin: (x, y) projected coordinates of the top-left corner
    crs_id: coordinate reference identifier, e.g. "EPSG:32620"
    nodata: sentinel value marking missing cells, or None
    """

    values: np.ndarray
    cell_size: float
    origin: tuple[float, float]
    crs_id: str
    nodata: float | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim == 2:
            values = values[np.newaxis, :, :]
        if values.ndim != 3:
            raise RasterFormatError(f"raster values must be (bands, h, w), got ndim={values.ndim}")
        if values.shape[1] < 1 or values.shape[2] < 1:
            raise RasterFormatError(f"raster must be at least 1x1, got {values.shape}")
        if not self.cell_size > 0:
            raise RasterFormatError(f"cell_size must be positive, got {self.cell_size}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "cell_size", float(self.cell_size))
        self.values.setflags(write=False)

    @property
    def bands(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]

    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the covered area."""
        x0, y0 = self.origin
        return (x0, y0 - self.height * self.cell_size, x0 + self.width * self.cell_size, y0)

    def band(self, index: int = 0) -> np.ndarray:
        return self.values[index]

    def nodata_mask(self) -> np.ndarray:
        """True where any band is nodata or NaN; shape (height, width)."""
        mask = np.isnan(self.values).any(axis=0)
        if self.nodata is not None and not math.isnan(self.nodata):
            mask |= (self.values == self.nodata).any(axis=0)
        return mask

    def same_geometry(self, other: "RasterGrid") -> bool:
        return (
            self.width == other.width
            and self.height == other.height
            and math.isclose(self.cell_size, other.cell_size, rel_tol=1e-9)
            and math.isclose(self.origin[0], other.origin[0], abs_tol=1e-6)
            and math.isclose(self.origin[1], other.origin[1], abs_tol=1e-6)
            and self.crs_id == other.crs_id
        )

    def world_to_cell(self, x: float, y: float) -> tuple[float, float]:
        """Continuous (col, row) coordinates of a projected point."""
        x0, y0 = self.origin
        return ((x - x0) / self.cell_size, (y0 - y) / self.cell_size)


def compute_ndsm(dsm: RasterGrid, dtm: RasterGrid, clamp_negative: bool = True) -> RasterGrid:
    """Per-cell surface-minus-terrain height above ground.

    Negative differences are clamped to 0 when clamp_negative is set
    (relative height is non-negative; small negatives come from sensor
    noise). Nodata in either input propagates to the output.
    """
    if dsm.bands != 1 or dtm.bands != 1:
        raise RasterFormatError(
            f"nDSM inputs must be single-band, got {dsm.bands} and {dtm.bands} bands"
        )
    if not dsm.same_geometry(dtm):
        raise GeometryMismatch(
            "DSM and DTM geometry differs: "
            f"{dsm.width}x{dsm.height}@{dsm.cell_size} {dsm.crs_id} origin {dsm.origin} vs "
            f"{dtm.width}x{dtm.height}@{dtm.cell_size} {dtm.crs_id} origin {dtm.origin}"
        )

    out = dsm.band(0).astype(np.float32) - dtm.band(0).astype(np.float32)
    if clamp_negative:
        out = np.maximum(out, 0.0)

    mask = dsm.nodata_mask() | dtm.nodata_mask()
    out_nodata = dsm.nodata if dsm.nodata is not None else dtm.nodata
    if mask.any():
        if out_nodata is None:
            out_nodata = -9999.0
        out[mask] = out_nodata

    return RasterGrid(
        values=out[np.newaxis],
        cell_size=dsm.cell_size,
        origin=dsm.origin,
        crs_id=dsm.crs_id,
        nodata=out_nodata,
    )


def _src_coords(out_n: int, src_n: int) -> np.ndarray:
    """Continuous source coordinates of output cell centers (1-D)."""
    scale = src_n / out_n
    return (np.arange(out_n) + 0.5) * scale - 0.5


def nearest_resample_array(a: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbour resample of a 2-D array to (out_h, out_w)."""
    rows = np.clip(np.rint(_src_coords(out_h, a.shape[0])).astype(int), 0, a.shape[0] - 1)
    cols = np.clip(np.rint(_src_coords(out_w, a.shape[1])).astype(int), 0, a.shape[1] - 1)
    return a[np.ix_(rows, cols)]


def bilinear_resample_array(a: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of a 2-D array to (out_h, out_w), edges clamped.

    Interpolation weights sum to 1, so constant fields are preserved
    exactly; output equals input when the shape is unchanged.
    """
    a = np.asarray(a, dtype=np.float32)
    if (out_h, out_w) == a.shape:
        return a.copy()
    ry = np.clip(_src_coords(out_h, a.shape[0]), 0.0, a.shape[0] - 1.0)
    rx = np.clip(_src_coords(out_w, a.shape[1]), 0.0, a.shape[1] - 1.0)
    y0 = np.floor(ry).astype(int)
    x0 = np.floor(rx).astype(int)
    y1 = np.minimum(y0 + 1, a.shape[0] - 1)
    x1 = np.minimum(x0 + 1, a.shape[1] - 1)
    wy = (ry - y0).astype(np.float32)[:, None]
    wx = (rx - x0).astype(np.float32)[None, :]
    top = a[np.ix_(y0, x0)] * (1 - wx) + a[np.ix_(y0, x1)] * wx
    bot = a[np.ix_(y1, x0)] * (1 - wx) + a[np.ix_(y1, x1)] * wx
    return (top * (1 - wy) + bot * wy).astype(np.float32)


def resample(raster: RasterGrid, target_cell_size: float, method: str = "bilinear") -> RasterGrid:
    """Resample to a new cell size over the same geographic extent.

    The output covers the input extent to within one target cell. Use
    nearest for categorical or nodata-heavy grids, bilinear for continuous
    fields. With bilinear, any output cell whose interpolation stencil
    touches nodata becomes nodata.
    """
    if not target_cell_size > 0:
        raise ValueError(f"target_cell_size must be positive, got {target_cell_size}")
    if method not in RESAMPLE_METHODS:
        raise ValueError(f"unknown resample method {method!r}, expected one of {RESAMPLE_METHODS}")
    if math.isclose(target_cell_size, raster.cell_size, rel_tol=1e-12):
        return replace(raster, values=raster.values.copy())

    ratio = raster.cell_size / target_cell_size
    out_h = max(1, int(round(raster.height * ratio)))
    out_w = max(1, int(round(raster.width * ratio)))

    mask = raster.nodata_mask()
    bands = []
    for b in range(raster.bands):
        src = raster.band(b)
        if method == "nearest":
            bands.append(nearest_resample_array(src, out_h, out_w))
        else:
            bands.append(bilinear_resample_array(src, out_h, out_w))
    out = np.stack(bands)

    out_nodata = raster.nodata
    if mask.any():
        if method == "nearest":
            out_mask = nearest_resample_array(mask.astype(np.float32), out_h, out_w) > 0
        else:
            # conservative: any stencil contact with nodata poisons the cell
            out_mask = bilinear_resample_array(mask.astype(np.float32), out_h, out_w) > 0
        if out_nodata is None:
            out_nodata = -9999.0
        out[:, out_mask] = out_nodata

    return RasterGrid(
        values=out,
        cell_size=target_cell_size,
        origin=raster.origin,
        crs_id=raster.crs_id,
        nodata=out_nodata,
    )

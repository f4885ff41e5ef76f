"""Exception types raised across the package."""


class RoofClassError(Exception):
    """Base class for all package-specific errors."""


class UngeoreferencedRaster(RoofClassError):
    """Raster file lacks geotransform or CRS metadata."""


class RasterFormatError(RoofClassError):
    """Raster file exists but cannot be used (band count, dtype, corrupt tags)."""


class GeometryMismatch(RoofClassError):
    """Two grids that must share geometry (size, origin, cell size, CRS) do not."""


class FootprintError(RoofClassError):
    """Footprint collection violates its schema (duplicate ids, invalid polygons)."""


class SplitError(RoofClassError):
    """Split request cannot be satisfied (e.g. region quota infeasible)."""


class ConfigError(RoofClassError):
    """Run configuration is invalid or inconsistent."""

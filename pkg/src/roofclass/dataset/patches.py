"""Patch geometry: footprint cropping, square padding, resizing.

Patches are numpy arrays of shape (h, w) or (bands, h, w); all three
operations treat the trailing two axes as rows and columns.
"""

from __future__ import annotations

import math

import numpy as np
from shapely.geometry import Polygon, box

from roofclass.errors import RoofClassError
from roofclass.geodata.raster import RasterGrid, bilinear_resample_array


class ExtractionError(RoofClassError):
    """Footprint cannot be cropped from the raster."""


def extract_patch(raster: RasterGrid, footprint: Polygon, scale: float = 1.5) -> np.ndarray:
    """Crop the axis-aligned bounding rectangle of a footprint, scaled.

    The rectangle is scaled about its center; the crop always has the full
    scaled-rectangle size in cells (rounded), with area falling outside
    the raster filled with zeros. Returns a (bands, h, w) float32 array.
    """
    if scale < 1.0:
        raise ValueError(f"scale must be >= 1, got {scale}")
    minx, miny, maxx, maxy = footprint.bounds
    if not footprint.intersects(box(*raster.extent())):
        raise ExtractionError(
            f"footprint bounds ({minx:.1f}, {miny:.1f}, {maxx:.1f}, {maxy:.1f}) "
            f"do not intersect raster extent {raster.extent()}"
        )

    cx, cy = (minx + maxx) / 2.0, (miny + maxy) / 2.0
    half_w = (maxx - minx) * scale / 2.0
    half_h = (maxy - miny) * scale / 2.0

    cell = raster.cell_size
    out_w = max(1, int(math.floor((maxx - minx) * scale / cell + 0.5)))
    out_h = max(1, int(math.floor((maxy - miny) * scale / cell + 0.5)))

    col0 = int(math.floor((cx - half_w - raster.origin[0]) / cell + 0.5))
    row0 = int(math.floor((raster.origin[1] - (cy + half_h)) / cell + 0.5))

    out = np.zeros((raster.bands, out_h, out_w), dtype=np.float32)
    src_r0 = max(row0, 0)
    src_r1 = min(row0 + out_h, raster.height)
    src_c0 = max(col0, 0)
    src_c1 = min(col0 + out_w, raster.width)
    if src_r1 > src_r0 and src_c1 > src_c0:
        out[:, src_r0 - row0 : src_r1 - row0, src_c0 - col0 : src_c1 - col0] = raster.values[
            :, src_r0:src_r1, src_c0:src_c1
        ]
    return out


def pad_to_square(patch: np.ndarray) -> np.ndarray:
    """Zero-pad to side = max(h, w), content centered.

    An odd padding difference puts the extra row at the bottom or the
    extra column on the right.
    """
    patch = np.asarray(patch)
    if patch.size == 0:
        raise ValueError("cannot pad an empty patch")
    h, w = patch.shape[-2], patch.shape[-1]
    side = max(h, w)
    top = (side - h) // 2
    bottom = side - h - top
    left = (side - w) // 2
    right = side - w - left
    pad = [(0, 0)] * (patch.ndim - 2) + [(top, bottom), (left, right)]
    return np.pad(patch, pad, mode="constant", constant_values=0)


def resize(patch: np.ndarray, side: int) -> np.ndarray:
    """Bilinear resize of the trailing two axes to side x side."""
    if side < 1:
        raise ValueError(f"side must be positive, got {side}")
    patch = np.asarray(patch, dtype=np.float32)
    if patch.ndim == 2:
        return bilinear_resample_array(patch, side, side)
    if patch.ndim == 3:
        return np.stack([bilinear_resample_array(b, side, side) for b in patch])
    raise ValueError(f"expected a 2-D or 3-D patch, got ndim={patch.ndim}")


def prepare_patches(samples, modality: str, side: int) -> np.ndarray:
    """Stack per-sample patches into a network-ready (n, C, side, side) batch.

    Each patch is zero-padded to a square and bilinearly resized, the
    preprocessing every backbone input goes through.
    """
    batch = [resize(pad_to_square(s.patch_for(modality)), side) for s in samples]
    if not batch:
        channels = 3 if modality == "rgb" else 1
        return np.zeros((0, channels, side, side), dtype=np.float32)
    return np.stack(batch).astype(np.float32)

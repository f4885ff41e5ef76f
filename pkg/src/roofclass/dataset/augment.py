"""Geometric augmentation applied identically to both modalities.

Each call draws an independent horizontal flip, vertical flip, and a
rotation angle uniform on [-90, +90] degrees, then applies the same draws
to the RGB and LiDAR patches so their geometric correspondence survives.
Rotation fills exposed corners with zeros. Angles of exactly -90, 0 or
+90 degrees are pure index permutations, applied without interpolation.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy import ndimage

from roofclass.dataset.samples import BuildingSample

EXACT_ANGLES = (-90.0, 0.0, 90.0)


def _rotate(patch: np.ndarray, angle: float) -> np.ndarray:
    if angle == 0.0:
        return patch.copy()
    if angle in (90.0, -90.0):
        k = 1 if angle == 90.0 else -1
        return np.ascontiguousarray(np.rot90(patch, k=k, axes=(-2, -1)))
    return ndimage.rotate(
        patch, angle, axes=(-2, -1), reshape=False, order=1, mode="constant", cval=0.0
    )


def transform_patch(patch: np.ndarray, flip_h: bool, flip_v: bool, angle: float) -> np.ndarray:
    """Flip then rotate the trailing two axes of a square patch."""
    out = patch
    if flip_h:
        out = np.flip(out, axis=-1)
    if flip_v:
        out = np.flip(out, axis=-2)
    return _rotate(np.ascontiguousarray(out), angle).astype(np.float32)


def apply_augmentation(
    sample: BuildingSample, flip_h: bool, flip_v: bool, angle: float
) -> BuildingSample:
    """Apply explicit flip/rotation draws to both patches; labels unchanged."""
    h, w = sample.lidar_patch.shape
    if h != w:
        raise ValueError(
            f"{sample.building_id}: augmentation expects square patches, got {h}x{w}"
        )
    lidar = transform_patch(sample.lidar_patch, flip_h, flip_v, angle)
    if angle not in EXACT_ANGLES:
        # interpolation can undershoot to tiny negatives near noise-level values
        lidar = np.maximum(lidar, 0.0)
    return dataclasses.replace(
        sample,
        rgb_patch=transform_patch(sample.rgb_patch, flip_h, flip_v, angle),
        lidar_patch=lidar,
    )


def augment(sample: BuildingSample, seed: int) -> BuildingSample:
    """Random flips (p=0.5 each) and a rotation uniform on [-90, 90] degrees."""
    rng = np.random.default_rng(seed)
    flip_h = bool(rng.random() < 0.5)
    flip_v = bool(rng.random() < 0.5)
    angle = float(rng.uniform(-90.0, 90.0))
    return apply_augmentation(sample, flip_h, flip_v, angle)

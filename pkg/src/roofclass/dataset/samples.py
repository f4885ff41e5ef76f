"""One building's paired image patches plus labels and provenance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from roofclass.dataset.labels import ROOF_MATERIAL_SCHEMA, ROOF_TYPE_SCHEMA

SPLITS = ("train", "test", "unassigned")


@dataclass
class BuildingSample:
    """Paired RGB and LiDAR-height patches for one footprint.

    rgb_patch: float32 (3, h, w), orthophoto values (0..255 scale)
    lidar_patch: float32 (h, w), height above ground in meters, >= 0
    """

    building_id: str
    rgb_patch: np.ndarray
    lidar_patch: np.ndarray
    roof_type: int | None = None
    roof_material: int | None = None
    country_tag: str = "Other"
    split: str = "unassigned"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rgb_patch = np.asarray(self.rgb_patch, dtype=np.float32)
        self.lidar_patch = np.asarray(self.lidar_patch, dtype=np.float32)
        if self.lidar_patch.ndim == 3 and self.lidar_patch.shape[0] == 1:
            self.lidar_patch = self.lidar_patch[0]
        if self.rgb_patch.ndim != 3 or self.rgb_patch.shape[0] != 3:
            raise ValueError(
                f"{self.building_id}: rgb_patch must be (3, h, w), got {self.rgb_patch.shape}"
            )
        if self.lidar_patch.ndim != 2:
            raise ValueError(
                f"{self.building_id}: lidar_patch must be (h, w), got {self.lidar_patch.shape}"
            )
        if self.rgb_patch.size == 0 or self.lidar_patch.size == 0:
            raise ValueError(f"{self.building_id}: empty patch")
        finite = self.lidar_patch[np.isfinite(self.lidar_patch)]
        if finite.size and finite.min() < 0:
            raise ValueError(f"{self.building_id}: negative heights in lidar patch")
        if self.split not in SPLITS:
            raise ValueError(f"{self.building_id}: unknown split {self.split!r}")
        if self.roof_type is not None and not 0 <= self.roof_type < ROOF_TYPE_SCHEMA.num_classes:
            raise ValueError(f"{self.building_id}: roof_type index {self.roof_type} out of range")
        if (
            self.roof_material is not None
            and not 0 <= self.roof_material < ROOF_MATERIAL_SCHEMA.num_classes
        ):
            raise ValueError(
                f"{self.building_id}: roof_material index {self.roof_material} out of range"
            )

    def patch_for(self, modality: str) -> np.ndarray:
        """Band-major patch for a modality: (3, h, w) rgb or (1, h, w) lidar."""
        if modality == "rgb":
            return self.rgb_patch
        if modality == "lidar":
            return self.lidar_patch[np.newaxis]
        raise KeyError(f"unknown modality {modality!r}")

"""Synthetic paired-patch generator for desk-scale verification runs.

Roof type is encoded only in the height channel (ridge-line geometry) and
roof material only in the RGB channel (color/texture statistics), so a
model trained on the wrong modality for a task has nothing to learn from.
The `joint` task combines one height-encoded bit (flat vs gable) with one
color-encoded bit (concrete vs blue tarpaulin), making both modalities
necessary to recover the full label.
"""

from __future__ import annotations

import numpy as np

from roofclass.dataset.labels import (
    ROOF_MATERIAL_SCHEMA,
    ROOF_TYPE_SCHEMA,
    schema_for,
)
from roofclass.dataset.samples import BuildingSample

EAVES_HEIGHT = 3.0  # meters, building body below the roof shape
RIDGE_AMPLITUDE = 2.5  # meters, peak height of gable/hip roofs above eaves


def _building_mask(side: int) -> tuple[slice, slice]:
    margin = max(1, side // 8)
    return slice(margin, side - margin), slice(margin, side - margin)


def _height_flat(rng, side):
    h = np.zeros((side, side), dtype=np.float32)
    rows, cols = _building_mask(side)
    h[rows, cols] = EAVES_HEIGHT
    return h


def _height_gable(rng, side):
    h = np.zeros((side, side), dtype=np.float32)
    rows, cols = _building_mask(side)
    n = rows.stop - rows.start
    t = np.linspace(0.0, 1.0, n, dtype=np.float32)
    profile = EAVES_HEIGHT + RIDGE_AMPLITUDE * (1.0 - np.abs(2.0 * t - 1.0))
    if rng.random() < 0.5:
        h[rows, cols] = profile[:, np.newaxis]  # ridge runs along columns
    else:
        h[rows, cols] = profile[np.newaxis, :]  # ridge runs along rows
    return h


def _height_hip(rng, side):
    h = np.zeros((side, side), dtype=np.float32)
    rows, cols = _building_mask(side)
    n = rows.stop - rows.start
    t = np.linspace(0.0, 1.0, n, dtype=np.float32)
    edge = np.minimum(t, 1.0 - t)  # distance to nearest edge, four sloping planes
    pyramid = 2.0 * np.minimum(edge[:, np.newaxis], edge[np.newaxis, :])
    h[rows, cols] = EAVES_HEIGHT + RIDGE_AMPLITUDE * pyramid
    return h


def _height_noroof(rng, side):
    return np.zeros((side, side), dtype=np.float32)


def _height_uninformative(rng, side):
    # identical constant slab for every material class
    return _height_flat(rng, side)


_HEIGHT_BY_TYPE = {
    "Gable": _height_gable,
    "Hip": _height_hip,
    "Flat": _height_flat,
    "NoRoof": _height_noroof,
}


def _rgb_base(side, color):
    rgb = np.empty((3, side, side), dtype=np.float32)
    for c in range(3):
        rgb[c] = color[c]
    return rgb


def _rgb_healthy_metal(rng, side):
    rgb = _rgb_base(side, (172.0, 174.0, 178.0))
    phase = rng.uniform(0, 2 * np.pi)
    stripes = 22.0 * np.sin(np.arange(side) * (2 * np.pi / 5.0) + phase).astype(np.float32)
    rgb += stripes[np.newaxis, np.newaxis, :]
    return rgb


def _rgb_irregular_metal(rng, side):
    rgb = _rgb_base(side, (138.0, 118.0, 96.0))
    for _ in range(int(rng.integers(6, 11))):
        r0, c0 = rng.integers(0, side, size=2)
        r1 = min(side, r0 + int(rng.integers(3, max(4, side // 2))))
        c1 = min(side, c0 + int(rng.integers(3, max(4, side // 2))))
        rgb[:, r0:r1, c0:c1] += rng.uniform(-60.0, 60.0, size=(3, 1, 1)).astype(np.float32)
    return rgb


def _rgb_concrete(rng, side):
    return _rgb_base(side, (122.0, 120.0, 116.0))


def _rgb_blue_tarp(rng, side):
    return _rgb_base(side, (45.0, 75.0, 205.0))


def _rgb_incomplete(rng, side):
    rgb = _rgb_base(side, (112.0, 106.0, 98.0))
    # missing section: a dark band covering 30-60% of the patch
    frac = rng.uniform(0.3, 0.6)
    extent = max(1, int(side * frac))
    if rng.random() < 0.5:
        rgb[:, :extent, :] = 18.0
    else:
        rgb[:, :, :extent] = 18.0
    return rgb


def _rgb_uninformative(rng, side):
    return rng.uniform(0.0, 255.0, size=(3, side, side)).astype(np.float32)


_RGB_BY_MATERIAL = {
    "HealthyMetal": _rgb_healthy_metal,
    "IrregularMetal": _rgb_irregular_metal,
    "ConcreteCement": _rgb_concrete,
    "BlueTarpaulin": _rgb_blue_tarp,
    "Incomplete": _rgb_incomplete,
}

# joint task: (type bit, color bit) per class, see labels.JOINT_SCHEMA
_JOINT_PARTS = {
    "FlatConcrete": ("Flat", "ConcreteCement"),
    "FlatTarpaulin": ("Flat", "BlueTarpaulin"),
    "GableConcrete": ("Gable", "ConcreteCement"),
    "GableTarpaulin": ("Gable", "BlueTarpaulin"),
}


def synth_generate(
    n_samples: int,
    task: str,
    seed: int = 0,
    side: int = 32,
    noise: float = 0.3,
) -> list[BuildingSample]:
    """Generate a balanced, labeled synthetic dataset.

    noise scales additive Gaussian noise on both channels (sigma = 0.5 m *
    noise on heights, 60 * noise on 0..255 RGB values). Identical seeds
    give bit-identical samples. Country tags cycle 3:1
    Dominica:SaintLucia so region-constrained splits stay feasible.
    """
    schema = schema_for(task)
    k = schema.num_classes
    if n_samples < k:
        raise ValueError(f"need at least {k} samples for task {task}, got {n_samples}")

    counts = [n_samples // k] * k
    for i in range(n_samples % k):
        counts[i] += 1

    lidar_sigma = 0.5 * noise
    rgb_sigma = 60.0 * noise

    children = np.random.SeedSequence(seed).spawn(n_samples)
    samples: list[BuildingSample] = []
    index = 0
    for label, count in enumerate(counts):
        class_name = schema.name_of(label)
        for _ in range(count):
            rng = np.random.default_rng(children[index])

            if task == "roof_type":
                height = _HEIGHT_BY_TYPE[class_name](rng, side)
                rgb = _rgb_uninformative(rng, side)
                roof_type, roof_material = label, None
            elif task == "roof_material":
                height = _height_uninformative(rng, side)
                rgb = _RGB_BY_MATERIAL[class_name](rng, side)
                roof_type, roof_material = None, label
            else:  # joint
                type_name, material_name = _JOINT_PARTS[class_name]
                height = _HEIGHT_BY_TYPE[type_name](rng, side)
                rgb = _RGB_BY_MATERIAL[material_name](rng, side)
                roof_type = ROOF_TYPE_SCHEMA.index_of(type_name)
                roof_material = ROOF_MATERIAL_SCHEMA.index_of(material_name)

            if noise > 0:
                height = height + rng.normal(0.0, lidar_sigma, size=height.shape).astype(np.float32)
                rgb = rgb + rng.normal(0.0, rgb_sigma, size=rgb.shape).astype(np.float32)
            height = np.clip(height, 0.0, None)
            rgb = np.clip(rgb, 0.0, 255.0)

            samples.append(
                BuildingSample(
                    building_id=f"synth-{index:06d}",
                    rgb_patch=rgb.astype(np.float32),
                    lidar_patch=height.astype(np.float32),
                    roof_type=roof_type,
                    roof_material=roof_material,
                    country_tag="SaintLucia" if index % 4 == 3 else "Dominica",
                    provenance={"generator": "synthetic", "task": task, "noise": noise},
                )
            )
            index += 1
    return samples

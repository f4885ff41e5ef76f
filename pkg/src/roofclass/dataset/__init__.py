"""Labeled building samples: extraction, augmentation, splits, synthesis, storage."""

from roofclass.dataset.labels import (
    JOINT_SCHEMA,
    LabelSchema,
    ROOF_MATERIAL_SCHEMA,
    ROOF_TYPE_SCHEMA,
    resolve_labels,
    schema_for,
)
from roofclass.dataset.samples import BuildingSample
from roofclass.dataset.patches import extract_patch, pad_to_square, prepare_patches, resize
from roofclass.dataset.augment import apply_augmentation, augment
from roofclass.dataset.split import SplitAssignment, stratified_split
from roofclass.dataset.synth import synth_generate
from roofclass.dataset.store import DatasetStore

__all__ = [
    "LabelSchema",
    "ROOF_TYPE_SCHEMA",
    "ROOF_MATERIAL_SCHEMA",
    "JOINT_SCHEMA",
    "schema_for",
    "resolve_labels",
    "BuildingSample",
    "extract_patch",
    "pad_to_square",
    "resize",
    "prepare_patches",
    "augment",
    "apply_augmentation",
    "SplitAssignment",
    "stratified_split",
    "synth_generate",
    "DatasetStore",
]

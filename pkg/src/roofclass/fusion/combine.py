"""Combining per-modality model outputs into fused vectors.

Feature-level fusion concatenates global-average-pool embeddings (RGB
block first, fixed order). Decision-level fusion either averages the two
softmax vectors or concatenates them for a downstream classifier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SOURCE_TAGS = ("feature_concat", "softmax_concat", "softmax_mean")
SOFTMAX_TOL = 1e-5


@dataclass
class FusionRecord:
    """One building's fused vector and its label for downstream training."""

    building_id: str
    vector: np.ndarray
    source_tag: str
    label: int

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64).ravel()
        if self.source_tag not in SOURCE_TAGS:
            raise ValueError(f"unknown source tag {self.source_tag!r}")


def _check_rows(a: np.ndarray, b: np.ndarray, op: str) -> None:
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"{op}: expected 2-D matrices, got {a.ndim}-D and {b.ndim}-D")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"{op}: row counts differ ({a.shape[0]} vs {b.shape[0]})")


def _check_alignment(ids_a, ids_b, op: str) -> None:
    if ids_a is None or ids_b is None:
        return
    ids_a, ids_b = list(ids_a), list(ids_b)
    if ids_a != ids_b:
        mismatch = next((i for i, (x, y) in enumerate(zip(ids_a, ids_b)) if x != y), None)
        raise ValueError(f"{op}: building_id alignment mismatch at row {mismatch}")


def _check_softmax(p: np.ndarray, name: str) -> None:
    if p.size == 0:
        return
    if not np.isfinite(p).all():
        raise ValueError(f"{name}: softmax matrix contains NaN or Inf")
    if p.min() < -SOFTMAX_TOL:
        raise ValueError(f"{name}: negative probabilities")
    sums = p.sum(axis=1)
    if np.abs(sums - 1.0).max() > 1e-4:
        raise ValueError(f"{name}: rows do not sum to 1 (worst {sums[np.argmax(np.abs(sums-1))]:.6f})")


def concat_features(
    f_rgb: np.ndarray, f_lidar: np.ndarray, rgb_ids=None, lidar_ids=None
) -> np.ndarray:
    """Row-wise [rgb ‖ lidar] embedding concatenation."""
    f_rgb = np.asarray(f_rgb, dtype=np.float64)
    f_lidar = np.asarray(f_lidar, dtype=np.float64)
    _check_rows(f_rgb, f_lidar, "concat_features")
    _check_alignment(rgb_ids, lidar_ids, "concat_features")
    return np.hstack([f_rgb, f_lidar])


def mean_softmax(p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Element-wise mean of two softmax matrices; rows still sum to 1."""
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    _check_rows(p1, p2, "mean_softmax")
    if p1.shape != p2.shape:
        raise ValueError(f"mean_softmax: shapes differ ({p1.shape} vs {p2.shape})")
    _check_softmax(p1, "mean_softmax p1")
    _check_softmax(p2, "mean_softmax p2")
    return (p1 + p2) / 2.0


def concat_softmax(p1: np.ndarray, p2: np.ndarray, ids1=None, ids2=None) -> np.ndarray:
    """Row-wise [p1 ‖ p2] softmax concatenation; each half sums to 1."""
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    _check_rows(p1, p2, "concat_softmax")
    if p1.shape != p2.shape:
        raise ValueError(f"concat_softmax: shapes differ ({p1.shape} vs {p2.shape})")
    _check_alignment(ids1, ids2, "concat_softmax")
    _check_softmax(p1, "concat_softmax p1")
    _check_softmax(p2, "concat_softmax p2")
    return np.hstack([p1, p2])


def records_from_matrix(ids, matrix, source_tag: str, labels) -> list[FusionRecord]:
    """Wrap fused rows into FusionRecords aligned with ids and labels."""
    matrix = np.asarray(matrix)
    ids = list(ids)
    labels = np.asarray(labels, dtype=np.int64)
    if len(ids) != matrix.shape[0] or len(ids) != len(labels):
        raise ValueError(
            f"records_from_matrix: {len(ids)} ids, {matrix.shape[0]} rows, {len(labels)} labels"
        )
    return [
        FusionRecord(building_id=i, vector=matrix[n], source_tag=source_tag, label=int(labels[n]))
        for n, i in enumerate(ids)
    ]

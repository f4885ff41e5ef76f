"""Column-wise feature scaling fit on training data only.

All methods reduce to (x - offset) / scale per column; a constant column
gets scale 1 so it maps to exactly 0 everywhere instead of dividing by
zero. Standard scaling uses the population standard deviation, robust
scaling the interquartile range, matching the usual library conventions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SCALER_METHODS = ("none", "minmax", "standard", "robust")


@dataclass
class ScalerParams:
    method: str
    offset: np.ndarray
    scale: np.ndarray

    @property
    def width(self) -> int:
        return len(self.offset)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "offset": np.asarray(self.offset).tolist(),
            "scale": np.asarray(self.scale).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(
            method=d["method"],
            offset=np.asarray(d["offset"], dtype=np.float64),
            scale=np.asarray(d["scale"], dtype=np.float64),
        )


def fit_scaler(train: np.ndarray, method: str) -> ScalerParams:
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] == 0:
        raise ValueError(f"scaler needs a non-empty 2-D train matrix, got shape {train.shape}")
    if method not in SCALER_METHODS:
        raise ValueError(f"unknown scaling method {method!r}, expected one of {SCALER_METHODS}")

    if method == "none":
        offset = np.zeros(train.shape[1])
        scale = np.ones(train.shape[1])
    elif method == "minmax":
        offset = train.min(axis=0)
        scale = train.max(axis=0) - offset
    elif method == "standard":
        offset = train.mean(axis=0)
        scale = train.std(axis=0)
    else:  # robust
        offset = np.median(train, axis=0)
        q75, q25 = np.percentile(train, [75, 25], axis=0)
        scale = q75 - q25
    scale = np.where(scale == 0, 1.0, scale)
    return ScalerParams(method=method, offset=offset, scale=scale)


def transform(params: ScalerParams, matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != params.width:
        raise ValueError(
            f"matrix width {matrix.shape[1] if matrix.ndim == 2 else '?'} does not match "
            f"scaler width {params.width}"
        )
    return (matrix - params.offset) / params.scale


def scale_features(
    train: np.ndarray, apply_to: np.ndarray, method: str
) -> tuple[np.ndarray, np.ndarray, ScalerParams]:
    """Fit on train only, apply to both; returns the fitted parameters."""
    params = fit_scaler(train, method)
    return transform(params, train), transform(params, apply_to), params

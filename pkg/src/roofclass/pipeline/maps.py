"""Classified building maps as GeoJSON FeatureCollections."""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
from shapely.geometry import mapping

from roofclass.dataset.patches import extract_patch, pad_to_square, resize
from roofclass.errors import ConfigError
from roofclass.fusion import concat_features, concat_softmax, mean_softmax, predict_downstream
from roofclass.geodata.footprints import FootprintSet
from roofclass.geodata.raster import RasterGrid
from roofclass.models import TrainedModel, extract_embeddings, predict_softmax

MAP_STRATEGIES = ("rgb_only", "lidar_only", "softmax_mean", "feature_concat", "softmax_concat")


def _patch_batch(raster: RasterGrid, footprints, side: int, scale: float) -> np.ndarray:
    patches = [
        resize(pad_to_square(extract_patch(raster, f.polygon, scale=scale)), side)
        for f in footprints
    ]
    channels = raster.bands
    if not patches:
        return np.zeros((0, channels, side, side), dtype=np.float32)
    return np.stack(patches).astype(np.float32)


def classify_footprints(
    footprints: FootprintSet,
    strategy: str,
    rgb_model: TrainedModel | None = None,
    lidar_model: TrainedModel | None = None,
    rgb_raster: RasterGrid | None = None,
    lidar_raster: RasterGrid | None = None,
    downstream=None,
    scale: float = 1.5,
    model_ref: str = "",
) -> dict:
    """Predict a class for every footprint and build a FeatureCollection.

    Single-modality strategies need one model and its raster; fusion
    strategies need both, and the concat strategies additionally need the
    fitted downstream classifier bundle.
    """
    if strategy not in MAP_STRATEGIES:
        raise ConfigError(f"unknown map strategy {strategy!r}")
    need_rgb = strategy != "lidar_only"
    need_lidar = strategy != "rgb_only"
    if need_rgb and (rgb_model is None or rgb_raster is None):
        raise ConfigError(f"strategy {strategy} needs an RGB model and raster")
    if need_lidar and (lidar_model is None or lidar_raster is None):
        raise ConfigError(f"strategy {strategy} needs a LiDAR model and raster")
    if strategy in ("feature_concat", "softmax_concat") and downstream is None:
        raise ConfigError(f"strategy {strategy} needs a downstream classifier")

    feats = list(footprints)
    schema = (rgb_model or lidar_model).label_schema
    confidence: np.ndarray | None = None

    p_rgb = p_lidar = None
    if need_rgb:
        x = _patch_batch(rgb_raster, feats, rgb_model.spec.input_side, scale)
        p_rgb = predict_softmax(rgb_model, x) if strategy != "feature_concat" else None
        e_rgb = extract_embeddings(rgb_model, x) if strategy == "feature_concat" else None
    if need_lidar:
        x = _patch_batch(lidar_raster, feats, lidar_model.spec.input_side, scale)
        p_lidar = predict_softmax(lidar_model, x) if strategy != "feature_concat" else None
        e_lidar = extract_embeddings(lidar_model, x) if strategy == "feature_concat" else None

    if strategy == "rgb_only":
        probs = p_rgb
    elif strategy == "lidar_only":
        probs = p_lidar
    elif strategy == "softmax_mean":
        probs = mean_softmax(p_rgb, p_lidar)
    else:
        if strategy == "feature_concat":
            vectors = concat_features(e_rgb, e_lidar)
        else:
            vectors = concat_softmax(p_rgb, p_lidar)
        preds = predict_downstream(downstream, vectors) if len(feats) else np.zeros(0, int)
        probs = None
        if len(feats) and hasattr(downstream.estimator, "predict_proba"):
            from roofclass.fusion.scaling import transform

            proba = downstream.estimator.predict_proba(
                transform(downstream.scaler_params, vectors)
            )
            confidence = proba.max(axis=1)

    if probs is not None:
        preds = probs.argmax(axis=1) if len(feats) else np.zeros(0, int)
        confidence = probs.max(axis=1) if len(feats) else None

    features = []
    for i, f in enumerate(feats):
        features.append(
            {
                "type": "Feature",
                "geometry": mapping(f.polygon),
                "properties": {
                    "building_id": f.building_id,
                    "predicted_class": schema.name_of(int(preds[i])),
                    "confidence": None if confidence is None else float(confidence[i]),
                    "model_ref": model_ref,
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def write_geojson(collection: dict, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(collection, fh)
    return path

"""CNN backbones, single-channel adaptation, training, and feature extraction."""

from roofclass.models.backbones import (
    ARCH_EMBEDDING_DIM,
    ARCH_INPUT_SIDE,
    BackboneSpec,
    TrainedModel,
    adapt_first_layer,
    build_model,
    extract_embeddings,
    predict_softmax,
)
from roofclass.models.training import (
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train,
)

__all__ = [
    "ARCH_EMBEDDING_DIM",
    "ARCH_INPUT_SIDE",
    "BackboneSpec",
    "TrainedModel",
    "adapt_first_layer",
    "build_model",
    "predict_softmax",
    "extract_embeddings",
    "TrainConfig",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]

"""Backbone construction, single-channel adaptation, softmax and embeddings.

Three production architectures (resnet50, inceptionv3, efficientnet_b0)
plus a `tiny_test` convnet small enough to train in CI without pretrained
weights. Every model is split into a feature extractor ending at global
average pooling and a classification head, so embeddings and softmax
vectors come from the same forward path the training loop optimizes.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn
from torchvision import models as tv_models

from roofclass.dataset.labels import LabelSchema

logger = logging.getLogger(__name__)

ARCH_EMBEDDING_DIM = {"resnet50": 2048, "inceptionv3": 2048, "efficientnet_b0": 1280}
ARCH_INPUT_SIDE = {"resnet50": 224, "inceptionv3": 299, "efficientnet_b0": 224}
ARCHITECTURES = ("resnet50", "inceptionv3", "efficientnet_b0", "tiny_test")

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

DEFAULT_HEIGHT_SCALE = 30.0  # meters mapped to 1.0 before the network

WEIGHTS_DIR_ENV = "ROOFCLASS_WEIGHTS_DIR"


@dataclass(frozen=True)
class BackboneSpec:
    """Architecture identity: input side, channel count, embedding width."""

    arch: str
    num_classes: int
    in_channels: int = 3
    input_side: int = 0  # 0 resolves to the architecture default
    embedding_dim: int = 0  # 0 resolves to the architecture default
    pretrained: bool = False
    dropout_before_fc: float = -1.0  # -1 resolves to 0.5 for resnet50, 0 otherwise
    init_seed: int = 0

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}, expected one of {ARCHITECTURES}")
        if self.in_channels not in (1, 3):
            raise ValueError(f"in_channels must be 1 or 3, got {self.in_channels}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")

        side = self.input_side
        if side == 0:
            side = ARCH_INPUT_SIDE.get(self.arch, 32)
        elif self.arch in ARCH_INPUT_SIDE and side != ARCH_INPUT_SIDE[self.arch]:
            raise ValueError(
                f"{self.arch} expects input side {ARCH_INPUT_SIDE[self.arch]}, got {side}"
            )
        object.__setattr__(self, "input_side", side)

        dim = self.embedding_dim
        if dim == 0:
            dim = ARCH_EMBEDDING_DIM.get(self.arch, 16)
        elif self.arch in ARCH_EMBEDDING_DIM and dim != ARCH_EMBEDDING_DIM[self.arch]:
            raise ValueError(
                f"{self.arch} has a fixed embedding width {ARCH_EMBEDDING_DIM[self.arch]}, got {dim}"
            )
        object.__setattr__(self, "embedding_dim", dim)

        dropout = self.dropout_before_fc
        if dropout < 0:
            dropout = 0.5 if self.arch == "resnet50" else 0.0
        object.__setattr__(self, "dropout_before_fc", float(dropout))

    def to_dict(self) -> dict:
        return {
            "arch": self.arch,
            "num_classes": self.num_classes,
            "in_channels": self.in_channels,
            "input_side": self.input_side,
            "embedding_dim": self.embedding_dim,
            "pretrained": self.pretrained,
            "dropout_before_fc": self.dropout_before_fc,
            "init_seed": self.init_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BackboneSpec":
        return cls(**d)


def adapt_first_layer(weights: torch.Tensor) -> torch.Tensor:
    """Collapse a pretrained 3-channel first convolution to one channel.

    Output[o, 0, i, j] is the mean over the three input-channel slices,
    so a single-channel input replicated across RGB sees one third of the
    original layer's response.
    """
    weights = torch.as_tensor(weights)
    if weights.ndim != 4 or weights.shape[1] != 3:
        raise ValueError(
            f"expected weights of shape (C_out, 3, k, k), got {tuple(weights.shape)}"
        )
    return weights.mean(dim=1, keepdim=True)


class TinyNet(nn.Module):
    """Small convnet for desk-scale runs: three conv blocks into GAP."""

    def __init__(self, in_channels: int, embedding_dim: int):
        super().__init__()
        self.stem = nn.Conv2d(in_channels, 16, kernel_size=3, padding=1, bias=False)
        self.body = nn.Sequential(
            nn.BatchNorm2d(16),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(16, 32, kernel_size=3, padding=1, bias=False),
            nn.BatchNorm2d(32),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(32, embedding_dim, kernel_size=3, padding=1, bias=False),
            nn.BatchNorm2d(embedding_dim),
            nn.ReLU(inplace=True),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(1),
        )

    def forward(self, x):
        return self.body(self.stem(x))


def torchvision_weight_provider(arch: str) -> dict | None:
    """Pretrained ImageNet weights: local directory first, then download.

    Returns None when weights cannot be obtained (offline test mode);
    callers fall back to seeded random initialization and mark the model
    as not comparable to pretrained runs.
    """
    local_dir = os.environ.get(WEIGHTS_DIR_ENV)
    if local_dir:
        candidate = os.path.join(local_dir, f"{arch}.pth")
        if os.path.exists(candidate):
            return torch.load(candidate, map_location="cpu", weights_only=True)
    enum = {
        "resnet50": tv_models.ResNet50_Weights.IMAGENET1K_V2,
        "inceptionv3": tv_models.Inception_V3_Weights.IMAGENET1K_V1,
        "efficientnet_b0": tv_models.EfficientNet_B0_Weights.IMAGENET1K_V1,
    }.get(arch)
    if enum is None:
        return None
    try:
        return enum.get_state_dict(progress=False)
    except Exception as exc:  # offline or cache failure
        logger.warning("pretrained weights for %s unavailable (%s); using random init", arch, exc)
        return None


class TrainedModel:
    """A backbone split into feature extractor and head, plus bookkeeping."""

    def __init__(
        self,
        spec: BackboneSpec,
        features: nn.Module,
        head: nn.Module,
        label_schema: LabelSchema,
        normalization: dict,
        pretrained_loaded: bool,
    ):
        self.spec = spec
        self.features = features
        self.head = head
        self.label_schema = label_schema
        self.normalization = dict(normalization)
        self.pretrained_loaded = pretrained_loaded
        self.history: list[dict] = []

    def parameters(self):
        yield from self.features.parameters()
        yield from self.head.parameters()

    def set_train_mode(self, training: bool) -> None:
        self.features.train(training)
        self.head.train(training)

    def normalize(self, batch: torch.Tensor) -> torch.Tensor:
        if self.spec.in_channels == 3:
            mean = torch.tensor(self.normalization["rgb_mean"], dtype=batch.dtype)
            std = torch.tensor(self.normalization["rgb_std"], dtype=batch.dtype)
            return (batch / 255.0 - mean[:, None, None]) / std[:, None, None]
        scale = float(self.normalization["height_scale"])
        return torch.clamp(batch / scale, 0.0, 1.0)

    def forward(self, batch: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(self.normalize(batch)))


def _first_conv_holder(arch: str, model: nn.Module):
    """(container, attribute name) of the first convolution for an arch."""
    if arch == "resnet50":
        return model, "conv1"
    if arch == "inceptionv3":
        return model.Conv2d_1a_3x3, "conv"
    if arch == "efficientnet_b0":
        return model.features[0], "0"
    return model, "stem"


def first_conv(arch: str, model: nn.Module) -> nn.Conv2d:
    holder, attr = _first_conv_holder(arch, model)
    return getattr(holder, attr)


def _swap_to_single_channel(arch: str, model: nn.Module, adapted: torch.Tensor | None) -> None:
    holder, attr = _first_conv_holder(arch, model)
    old: nn.Conv2d = getattr(holder, attr)
    new = nn.Conv2d(
        1,
        old.out_channels,
        kernel_size=old.kernel_size,
        stride=old.stride,
        padding=old.padding,
        bias=old.bias is not None,
    )
    if adapted is not None:
        with torch.no_grad():
            new.weight.copy_(adapted)
            if old.bias is not None:
                new.bias.copy_(old.bias)
    setattr(holder, attr, new)


def build_model(
    spec: BackboneSpec,
    label_schema: LabelSchema | None = None,
    weight_provider=torchvision_weight_provider,
) -> TrainedModel:
    """Construct an untrained model for a spec.

    With pretrained=True the provider supplies ImageNet weights and, for
    single-channel specs, the first convolution is replaced with the
    channel mean of the pretrained kernel. When weights are unavailable
    the model falls back to deterministic random initialization
    (pretrained_loaded=False).
    """
    if label_schema is not None and label_schema.num_classes != spec.num_classes:
        raise ValueError(
            f"schema {label_schema.task} has {label_schema.num_classes} classes, "
            f"spec declares {spec.num_classes}"
        )
    torch.manual_seed(spec.init_seed)

    pretrained_state = None
    if spec.pretrained and weight_provider is not None:
        pretrained_state = weight_provider(spec.arch)

    if spec.arch == "resnet50":
        net = tv_models.resnet50(weights=None)
        net.fc = nn.Identity()
    elif spec.arch == "inceptionv3":
        net = tv_models.inception_v3(weights=None, aux_logits=False, init_weights=True)
        net.fc = nn.Identity()
        net.dropout = nn.Identity()  # head owns any dropout; embeddings stay deterministic
    elif spec.arch == "efficientnet_b0":
        net = tv_models.efficientnet_b0(weights=None)
        net.classifier = nn.Identity()
    else:
        net = TinyNet(3, spec.embedding_dim)

    if pretrained_state is not None:
        state = {
            k: v
            for k, v in pretrained_state.items()
            if not k.startswith(("fc.", "classifier.", "AuxLogits."))
        }
        net.load_state_dict(state, strict=False)

    if spec.in_channels == 1:
        adapted = None
        if pretrained_state is not None:
            adapted = adapt_first_layer(first_conv(spec.arch, net).weight.detach())
        _swap_to_single_channel(spec.arch, net, adapted)

    head_layers: list[nn.Module] = []
    if spec.dropout_before_fc > 0:
        head_layers.append(nn.Dropout(spec.dropout_before_fc))
    head_layers.append(nn.Linear(spec.embedding_dim, spec.num_classes))
    head = nn.Sequential(*head_layers)

    if spec.in_channels == 3:
        if pretrained_state is not None:
            normalization = {"rgb_mean": list(IMAGENET_MEAN), "rgb_std": list(IMAGENET_STD)}
        else:
            # placeholder; replaced with dataset statistics at training time
            normalization = {"rgb_mean": [0.5, 0.5, 0.5], "rgb_std": [0.25, 0.25, 0.25]}
    else:
        normalization = {"height_scale": DEFAULT_HEIGHT_SCALE}

    return TrainedModel(
        spec=spec,
        features=net,
        head=head,
        label_schema=label_schema,
        normalization=normalization,
        pretrained_loaded=pretrained_state is not None,
    )


def _as_batch_tensor(model: TrainedModel, patches) -> torch.Tensor:
    x = torch.as_tensor(np.asarray(patches, dtype=np.float32))
    if x.ndim != 4:
        raise ValueError(f"expected a (n, C, H, W) batch, got shape {tuple(x.shape)}")
    n, c, h, w = x.shape
    spec = model.spec
    if c != spec.in_channels or h != spec.input_side or w != spec.input_side:
        raise ValueError(
            f"batch shape {tuple(x.shape)} does not match spec "
            f"({spec.in_channels} channels, side {spec.input_side})"
        )
    return x


def predict_softmax(model: TrainedModel, patches, batch_size: int = 128) -> np.ndarray:
    """Class-probability rows for a batch of patches (inference mode)."""
    x = _as_batch_tensor(model, patches)
    model.set_train_mode(False)
    outputs = []
    with torch.no_grad():
        for i in range(0, len(x), batch_size):
            logits = model.forward(x[i : i + batch_size])
            outputs.append(torch.softmax(logits, dim=1))
    if not outputs:
        return np.zeros((0, model.spec.num_classes), dtype=np.float32)
    return torch.cat(outputs).numpy()


def extract_embeddings(model: TrainedModel, patches, batch_size: int = 128) -> np.ndarray:
    """Global-average-pool activations preceding the classification head."""
    x = _as_batch_tensor(model, patches)
    model.set_train_mode(False)
    outputs = []
    with torch.no_grad():
        for i in range(0, len(x), batch_size):
            outputs.append(model.features(model.normalize(x[i : i + batch_size])))
    if not outputs:
        return np.zeros((0, model.spec.embedding_dim), dtype=np.float32)
    emb = torch.cat(outputs).numpy()
    if emb.shape[1] != model.spec.embedding_dim:
        raise RuntimeError(
            f"feature extractor produced width {emb.shape[1]}, "
            f"spec declares {model.spec.embedding_dim}"
        )
    return emb

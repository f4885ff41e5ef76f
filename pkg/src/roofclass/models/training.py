"""Fine-tuning loop: Adam, cross-entropy, plateau learning-rate decay.

The learning rate drops by `plateau_factor` once the monitored quantity
(validation loss, or training loss when no validation data exists) has
gone `plateau_patience` consecutive epochs without improving. When no
validation set is supplied, a stratified fraction of the training data is
held out for monitoring.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from roofclass.dataset.augment import transform_patch
from roofclass.dataset.labels import LabelSchema, resolve_labels, schema_for
from roofclass.dataset.patches import prepare_patches
from roofclass.models.backbones import BackboneSpec, TrainedModel, build_model

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-5
    batch_size: int = 32
    max_epochs: int = 30
    plateau_factor: float = 0.1
    plateau_patience: int = 7
    min_delta: float = 0.0
    val_fraction: float = 0.1
    augment: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0:
            raise ValueError("learning_rate and batch_size must be positive")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if not 0 < self.plateau_factor < 1:
            raise ValueError("plateau_factor must be in (0, 1)")
        if self.plateau_patience <= 0:
            raise ValueError("plateau_patience must be positive")
        # a scheduler that can never fire is a config error; 0/1-epoch runs
        # are degenerate (smoke tests, resume probes) and exempt
        if self.max_epochs > 1 and self.plateau_patience >= self.max_epochs:
            raise ValueError("plateau_patience must be smaller than max_epochs")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must be in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


class PlateauTracker:
    """Signals a learning-rate reduction after `patience` stale epochs."""

    def __init__(self, patience: int, min_delta: float = 0.0):
        self.patience = patience
        self.min_delta = min_delta
        self.best = float("inf")
        self.stale = 0

    def update(self, value: float) -> bool:
        if value < self.best - self.min_delta:
            self.best = value
            self.stale = 0
            return False
        self.stale += 1
        if self.stale >= self.patience:
            self.stale = 0
            return True
        return False


def _holdout_split(y: np.ndarray, fraction: float, seed: int) -> np.ndarray:
    """Boolean mask of per-class holdout rows (True = validation)."""
    rng = np.random.default_rng(seed)
    mask = np.zeros(len(y), dtype=bool)
    for label in np.unique(y):
        idx = np.flatnonzero(y == label)
        n_val = int(round(fraction * len(idx)))
        if n_val and n_val < len(idx):
            mask[rng.choice(idx, size=n_val, replace=False)] = True
    return mask


def _epoch_eval(model: TrainedModel, x: torch.Tensor, y: torch.Tensor, loss_fn, batch_size: int):
    model.set_train_mode(False)
    losses, correct = 0.0, 0
    with torch.no_grad():
        for i in range(0, len(x), batch_size):
            xb, yb = x[i : i + batch_size], y[i : i + batch_size]
            logits = model.forward(xb)
            losses += float(loss_fn(logits, yb)) * len(xb)
            correct += int((logits.argmax(dim=1) == yb).sum())
    return losses / len(x), correct / len(x)


def _augment_batch(xb: np.ndarray, epoch: int, indices: np.ndarray, seed: int) -> np.ndarray:
    out = np.empty_like(xb)
    for row, idx in enumerate(indices):
        rng = np.random.default_rng((seed, epoch, int(idx)))
        flip_h = bool(rng.random() < 0.5)
        flip_v = bool(rng.random() < 0.5)
        angle = float(rng.uniform(-90.0, 90.0))
        out[row] = transform_patch(xb[row], flip_h, flip_v, angle)
    return out


def train(
    model: TrainedModel,
    train_samples,
    val_samples=None,
    config: TrainConfig | None = None,
    start_epoch: int = 0,
) -> TrainedModel:
    """Fine-tune a model in place and append per-epoch history records.

    Accepts BuildingSample lists; patches are padded, resized to the
    spec's input side and stacked. Deterministic for a fixed config seed
    on a fixed machine.
    """
    config = config or TrainConfig()
    if model.label_schema is None:
        raise ValueError("model has no label schema; build it with one before training")
    if not train_samples:
        raise ValueError("empty training set")

    task = model.label_schema.task
    modality = "rgb" if model.spec.in_channels == 3 else "lidar"
    side = model.spec.input_side

    x_train = prepare_patches(train_samples, modality, side)
    y_train = resolve_labels(train_samples, task)
    if y_train.max() >= model.spec.num_classes:
        raise ValueError(
            f"label index {int(y_train.max())} outside the {model.spec.num_classes}-class schema"
        )

    if val_samples is not None:
        x_val = prepare_patches(val_samples, modality, side)
        y_val = resolve_labels(val_samples, task)
    elif config.val_fraction > 0:
        holdout = _holdout_split(y_train, config.val_fraction, config.seed)
        x_val, y_val = x_train[holdout], y_train[holdout]
        x_train, y_train = x_train[~holdout], y_train[~holdout]
    else:
        x_val = np.zeros((0,) + x_train.shape[1:], dtype=np.float32)
        y_val = np.zeros(0, dtype=np.int64)

    # dataset statistics for RGB normalization when no pretrained stats exist
    if model.spec.in_channels == 3 and not model.pretrained_loaded and start_epoch == 0:
        scaled = x_train / 255.0
        mean = scaled.mean(axis=(0, 2, 3))
        std = np.maximum(scaled.std(axis=(0, 2, 3)), 1e-6)
        model.normalization = {"rgb_mean": mean.tolist(), "rgb_std": std.tolist()}

    xt = torch.as_tensor(x_train)
    yt = torch.as_tensor(y_train)
    xv = torch.as_tensor(x_val)
    yv = torch.as_tensor(y_val)

    torch.manual_seed(config.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    tracker = PlateauTracker(config.plateau_patience, config.min_delta)
    lr = config.learning_rate

    for epoch_offset in range(config.max_epochs):
        epoch = start_epoch + epoch_offset
        order = np.random.default_rng((config.seed, epoch)).permutation(len(xt))

        model.set_train_mode(True)
        running_loss, correct, seen = 0.0, 0, 0
        for i in range(0, len(order), config.batch_size):
            idx = order[i : i + config.batch_size]
            if len(idx) == 1 and len(order) > 1:
                continue  # batch-norm cannot update statistics from one sample
            xb_np = x_train[idx]
            if config.augment:
                xb_np = _augment_batch(xb_np, epoch, idx, config.seed)
            xb = torch.as_tensor(xb_np)
            yb = yt[idx]
            optimizer.zero_grad()
            logits = model.forward(xb)
            loss = loss_fn(logits, yb)
            loss.backward()
            optimizer.step()
            running_loss += float(loss.detach()) * len(idx)
            correct += int((logits.argmax(dim=1) == yb).sum())
            seen += len(idx)

        train_loss = running_loss / max(seen, 1)
        train_acc = correct / max(seen, 1)
        if len(xv):
            val_loss, val_acc = _epoch_eval(model, xv, yv, loss_fn, config.batch_size)
            monitored = val_loss
        else:
            val_loss, val_acc = None, None
            monitored = train_loss

        model.history.append(
            {
                "epoch": epoch,
                "train_loss": train_loss,
                "train_acc": train_acc,
                "val_loss": val_loss,
                "val_acc": val_acc,
                "lr": lr,
            }
        )
        logger.info(
            "epoch %d: train_loss=%.4f train_acc=%.3f val_loss=%s lr=%.2e",
            epoch,
            train_loss,
            train_acc,
            "n/a" if val_loss is None else f"{val_loss:.4f}",
            lr,
        )

        if tracker.update(monitored):
            lr *= config.plateau_factor
            for group in optimizer.param_groups:
                group["lr"] = lr
            logger.info("plateau: reducing learning rate to %.2e", lr)

    model.set_train_mode(False)
    return model


# ----------------------------------------------------------- persistence


def save_checkpoint(
    model: TrainedModel,
    directory,
    train_config: TrainConfig | None = None,
    data_manifest_hash: str | None = None,
) -> Path:
    """Write weights, a JSON sidecar, and the history CSV to a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    torch.save(
        {
            "features": model.features.state_dict(),
            "head": model.head.state_dict(),
        },
        directory / "model.pt",
    )
    sidecar = {
        "spec": model.spec.to_dict(),
        "train_config": train_config.to_dict() if train_config else None,
        "label_schema": {
            "task": model.label_schema.task,
            "classes": list(model.label_schema.classes),
        }
        if model.label_schema
        else None,
        "normalization": model.normalization,
        "pretrained_loaded": model.pretrained_loaded,
        "data_manifest_hash": data_manifest_hash,
        "history": model.history,
    }
    with open(directory / "model.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)

    with open(directory / "history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "lr"])
        for row in model.history:
            writer.writerow([row["epoch"], row["train_loss"], row["val_loss"], row["lr"]])
    return directory


def load_checkpoint(directory) -> TrainedModel:
    """Rebuild a TrainedModel from a checkpoint directory."""
    directory = Path(directory)
    with open(directory / "model.json") as fh:
        sidecar = json.load(fh)

    spec = BackboneSpec.from_dict(sidecar["spec"])
    schema = None
    if sidecar.get("label_schema"):
        stored = sidecar["label_schema"]
        schema = schema_for(stored["task"])
        if list(schema.classes) != stored["classes"]:
            schema = LabelSchema(stored["task"], tuple(stored["classes"]))

    model = build_model(spec, label_schema=schema, weight_provider=None)
    state = torch.load(directory / "model.pt", map_location="cpu", weights_only=True)
    model.features.load_state_dict(state["features"])
    model.head.load_state_dict(state["head"])
    model.normalization = sidecar["normalization"]
    model.pretrained_loaded = sidecar["pretrained_loaded"]
    model.history = sidecar.get("history", [])
    model.set_train_mode(False)
    return model

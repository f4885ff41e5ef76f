import copy

import numpy as np
import pytest
import torch

from roofclass.dataset import synth_generate
from roofclass.dataset.labels import schema_for
from roofclass.models import (
    BackboneSpec,
    TrainConfig,
    build_model,
    load_checkpoint,
    predict_softmax,
    save_checkpoint,
    train,
)
from roofclass.models.training import PlateauTracker


def tiny_lidar_model(seed=0, num_classes=4, side=16):
    spec = BackboneSpec(
        "tiny_test", num_classes, in_channels=1, input_side=side, embedding_dim=16, init_seed=seed
    )
    return build_model(spec, schema_for("roof_type"))


def separable_samples(n=80, seed=0, side=16):
    # low noise makes the height geometry cleanly separable
    return synth_generate(n, "roof_type", seed=seed, side=side, noise=0.05)


class TestTrainConfig:
    def test_defaults_match_training_recipe(self):
        cfg = TrainConfig()
        assert cfg.learning_rate == 1e-5
        assert cfg.batch_size == 32
        assert cfg.max_epochs == 30
        assert cfg.plateau_factor == 0.1
        assert cfg.plateau_patience == 7

    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0)
        with pytest.raises(ValueError):
            TrainConfig(plateau_patience=30, max_epochs=30)
        with pytest.raises(ValueError):
            TrainConfig(plateau_factor=1.5)


class TestPlateauTracker:
    def test_reduces_after_exactly_patience_stale_epochs(self):
        tracker = PlateauTracker(patience=7)
        tracker.update(1.0)
        signals = [tracker.update(1.0) for _ in range(7)]
        assert signals == [False] * 6 + [True]

    def test_improvement_resets(self):
        tracker = PlateauTracker(patience=3)
        tracker.update(1.0)
        tracker.update(1.0)
        tracker.update(0.5)  # improvement
        assert [tracker.update(0.5) for _ in range(3)] == [False, False, True]

    def test_min_delta(self):
        tracker = PlateauTracker(patience=2, min_delta=0.1)
        tracker.update(1.0)
        assert tracker.update(0.95) is False  # within min_delta: stale
        assert tracker.update(0.94) is True


class TestTrainLoop:
    def test_separable_data_reaches_high_accuracy(self):
        model = tiny_lidar_model()
        cfg = TrainConfig(learning_rate=5e-3, batch_size=16, max_epochs=30, val_fraction=0.0, seed=0)
        train(model, separable_samples(), config=cfg)
        assert len(model.history) == 30
        assert model.history[-1]["train_acc"] >= 0.95

    def test_loss_decreases_over_first_epochs(self):
        model = tiny_lidar_model(seed=1)
        cfg = TrainConfig(learning_rate=2e-3, batch_size=16, max_epochs=5, plateau_patience=4, val_fraction=0.0, seed=1)
        train(model, separable_samples(seed=1), config=cfg)
        losses = [row["train_loss"] for row in model.history]
        assert losses[4] < losses[0]

    def test_lr_drops_after_seven_stagnant_epochs(self):
        model = tiny_lidar_model(seed=2)
        # huge min_delta makes every epoch after the first count as stagnant
        cfg = TrainConfig(
            learning_rate=1e-5,
            batch_size=16,
            max_epochs=9,
            plateau_patience=7,
            min_delta=1e9,
            val_fraction=0.0,
            seed=2,
        )
        train(model, separable_samples(n=32, seed=2), config=cfg)
        lrs = [row["lr"] for row in model.history]
        # epoch 0 sets the baseline; epochs 1..7 stagnate; epoch 8 runs reduced
        assert lrs[:8] == [1e-5] * 8
        assert lrs[8] == pytest.approx(1e-6)

    def test_zero_epochs_is_noop(self):
        model = tiny_lidar_model(seed=3)
        before = copy.deepcopy(model.features.state_dict())
        train(model, separable_samples(n=16, seed=3), config=TrainConfig(max_epochs=0))
        after = model.features.state_dict()
        assert all(torch.equal(before[k], after[k]) for k in before)
        assert model.history == []

    def test_empty_training_set_rejected(self):
        with pytest.raises(ValueError, match="empty training set"):
            train(tiny_lidar_model(), [], config=TrainConfig(max_epochs=1))

    def test_deterministic_given_seed(self):
        cfg = TrainConfig(learning_rate=1e-3, batch_size=16, max_epochs=3, plateau_patience=2, val_fraction=0.1, seed=4)
        histories = []
        for _ in range(2):
            model = tiny_lidar_model(seed=4)
            train(model, separable_samples(n=40, seed=4), config=cfg)
            histories.append(model.history)
        assert histories[0] == histories[1]

    def test_explicit_validation_set_monitored(self):
        model = tiny_lidar_model(seed=5)
        samples = separable_samples(n=48, seed=5)
        cfg = TrainConfig(learning_rate=1e-3, batch_size=16, max_epochs=2, plateau_patience=1, seed=5)
        train(model, samples[:40], val_samples=samples[40:], config=cfg)
        assert all(np.isfinite(row["val_loss"]) for row in model.history)

    def test_augmentation_path_runs(self):
        model = tiny_lidar_model(seed=6)
        cfg = TrainConfig(
            learning_rate=1e-3, batch_size=8, max_epochs=2, plateau_patience=1, val_fraction=0.0, augment=True, seed=6
        )
        train(model, separable_samples(n=16, seed=6), config=cfg)
        assert len(model.history) == 2

    def test_rgb_normalization_learned_from_data(self):
        spec = BackboneSpec(
            "tiny_test", 5, in_channels=3, input_side=16, embedding_dim=16, init_seed=7
        )
        model = build_model(spec, schema_for("roof_material"))
        samples = synth_generate(20, "roof_material", seed=7, side=16)
        train(model, samples, config=TrainConfig(max_epochs=1, val_fraction=0.0, seed=7))
        mean = model.normalization["rgb_mean"]
        assert len(mean) == 3
        assert mean != [0.5, 0.5, 0.5]  # replaced by dataset statistics


class TestCheckpoint:
    def test_roundtrip_preserves_predictions(self, tmp_path):
        model = tiny_lidar_model(seed=8)
        samples = separable_samples(n=24, seed=8)
        cfg = TrainConfig(learning_rate=1e-3, batch_size=8, max_epochs=2, plateau_patience=1, val_fraction=0.0, seed=8)
        train(model, samples, config=cfg)

        from roofclass.dataset import prepare_patches

        x = prepare_patches(samples[:6], "lidar", 16)
        before = predict_softmax(model, x)
        save_checkpoint(model, tmp_path / "ckpt", train_config=cfg, data_manifest_hash="abc")
        loaded = load_checkpoint(tmp_path / "ckpt")
        after = predict_softmax(loaded, x)
        assert np.allclose(before, after, atol=1e-6)
        assert loaded.label_schema.task == "roof_type"
        assert loaded.history == model.history

    def test_history_csv_columns(self, tmp_path):
        model = tiny_lidar_model(seed=9)
        cfg = TrainConfig(learning_rate=1e-3, batch_size=8, max_epochs=2, plateau_patience=1, val_fraction=0.0, seed=9)
        train(model, separable_samples(n=16, seed=9), config=cfg)
        save_checkpoint(model, tmp_path / "ckpt", train_config=cfg)
        lines = (tmp_path / "ckpt" / "history.csv").read_text().strip().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss,lr"
        assert len(lines) == 3

    def test_resume_continues_epoch_numbering(self, tmp_path):
        model = tiny_lidar_model(seed=10)
        samples = separable_samples(n=16, seed=10)
        cfg = TrainConfig(learning_rate=1e-3, batch_size=8, max_epochs=2, plateau_patience=1, val_fraction=0.0, seed=10)
        train(model, samples, config=cfg)
        save_checkpoint(model, tmp_path / "ckpt", train_config=cfg)

        resumed = load_checkpoint(tmp_path / "ckpt")
        train(resumed, samples, config=cfg, start_epoch=len(resumed.history))
        assert [row["epoch"] for row in resumed.history] == [0, 1, 2, 3]

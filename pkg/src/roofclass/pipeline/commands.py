"""Command implementations behind the CLI subcommands.

Each command validates its inputs up front, performs one pipeline stage,
and leaves a manifest in the run directory sufficient to reproduce the
invocation. All randomness is derived from the config's root seed, one
stream per component.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from roofclass.dataset import (
    BuildingSample,
    DatasetStore,
    prepare_patches,
    resolve_labels,
    schema_for,
    stratified_split,
    synth_generate,
)
from roofclass.dataset.patches import ExtractionError, extract_patch
from roofclass.errors import ConfigError, RoofClassError
from roofclass.fusion import (
    SearchProtocol,
    concat_features,
    concat_softmax,
    fit_downstream,
    load_downstream,
    mean_softmax,
    predict_downstream,
    records_from_matrix,
    save_downstream,
    write_cv_table,
)
from roofclass.geodata import compute_ndsm, load_footprints, load_raster, write_raster
from roofclass.metrics import MetricsReport, evaluate, format_report_table
from roofclass.models import (
    BackboneSpec,
    TrainConfig,
    build_model,
    extract_embeddings,
    load_checkpoint,
    predict_softmax,
    save_checkpoint,
    train,
)
from roofclass.pipeline.config import RunConfig
from roofclass.pipeline.manifest import (
    RunManifest,
    model_state_hash,
    sha256_file,
    sha256_text,
)
from roofclass.pipeline.maps import classify_footprints, write_geojson

logger = logging.getLogger(__name__)


def _apply_determinism(config: RunConfig) -> None:
    if config.deterministic:
        torch.use_deterministic_algorithms(True)


def _checkpoint_dir(config: RunConfig, modality: str) -> Path:
    return Path(config.output_dir) / "checkpoints" / modality


def _backbone_spec(config: RunConfig, modality: str) -> BackboneSpec:
    section = config.rgb_model if modality == "rgb" else config.lidar_model
    schema = schema_for(config.task)
    return BackboneSpec(
        arch=section.arch,
        num_classes=schema.num_classes,
        in_channels=3 if modality == "rgb" else 1,
        input_side=section.input_side,
        embedding_dim=section.embedding_dim,
        pretrained=section.pretrained,
        init_seed=config.component_seed("init", modality),
    )


def _train_config(config: RunConfig, modality: str, max_epochs: int | None = None) -> TrainConfig:
    t = config.train
    epochs = t.max_epochs if max_epochs is None else max_epochs
    patience = t.plateau_patience
    if epochs > 1 and patience >= epochs:
        patience = epochs - 1
        logger.info("clamping plateau_patience to %d for a %d-epoch run", patience, epochs)
    return TrainConfig(
        learning_rate=t.learning_rate,
        batch_size=t.batch_size,
        max_epochs=epochs,
        plateau_factor=t.plateau_factor,
        plateau_patience=patience,
        min_delta=t.min_delta,
        val_fraction=t.val_fraction,
        augment=t.augment,
        seed=config.component_seed("train", modality),
    )


# ------------------------------------------------------------------ ndsm


def cmd_ndsm(dsm_path: str, dtm_path: str, out_path: str, clamp_negative: bool = True) -> int:
    """Derive the height-above-ground raster from DSM and DTM files."""
    dsm = load_raster(dsm_path)
    dtm = load_raster(dtm_path)
    ndsm = compute_ndsm(dsm, dtm, clamp_negative=clamp_negative)
    write_raster(ndsm, out_path, storage="float32")
    finite = ndsm.band(0)[~ndsm.nodata_mask()]
    logger.info(
        "nDSM written to %s (%dx%d, height range %.2f..%.2f m)",
        out_path,
        ndsm.width,
        ndsm.height,
        finite.min() if finite.size else float("nan"),
        finite.max() if finite.size else float("nan"),
    )
    return 0


# ----------------------------------------------------------------- synth


def cmd_synth(config: RunConfig) -> int:
    """Generate a synthetic packaged dataset at data.dataset_dir."""
    samples = synth_generate(
        config.data.n_samples,
        config.task,
        seed=config.component_seed("synth"),
        side=config.data.side,
        noise=config.data.noise,
    )
    store = DatasetStore.create(
        config.data.dataset_dir,
        samples,
        source={"mode": "synthetic", "task": config.task, "noise": config.data.noise},
        extraction={"generator_seed": config.component_seed("synth"), "side": config.data.side},
    )
    manifest = RunManifest("synth", config.to_dict())
    manifest.record_output("dataset_manifest_sha256", sha256_file(store.manifest_path))
    manifest.record_output("n_samples", len(samples))
    manifest.write(Path(config.output_dir) / "synth")
    logger.info("synthetic dataset with %d samples at %s", len(samples), config.data.dataset_dir)
    return 0


# --------------------------------------------------------------- extract


def _load_labels_csv(path: str) -> dict[str, dict]:
    """Label file: building_id,roof_type,roof_material (names, blanks allowed)."""
    type_schema = schema_for("roof_type")
    material_schema = schema_for("roof_material")
    labels: dict[str, dict] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"building_id"}
        if not required.issubset(reader.fieldnames or []):
            raise ConfigError(f"{path}: label file needs a building_id column")
        for row in reader:
            entry = {}
            if row.get("roof_type"):
                entry["roof_type"] = type_schema.index_of(row["roof_type"].strip())
            if row.get("roof_material"):
                entry["roof_material"] = material_schema.index_of(row["roof_material"].strip())
            labels[row["building_id"].strip()] = entry
    return labels


def cmd_extract(config: RunConfig) -> int:
    """Build the packaged dataset from rasters + footprints + labels."""
    if config.data.mode == "synthetic":
        logger.info("data.mode=synthetic: extract delegates to the generator")
        return cmd_synth(config)

    config.data.require_paths()
    rgb = load_raster(config.data.rgb_raster)
    if config.data.ndsm:
        ndsm = load_raster(config.data.ndsm)
    else:
        ndsm = compute_ndsm(load_raster(config.data.dsm), load_raster(config.data.dtm))
    footprints = load_footprints(config.data.footprints)
    labels = _load_labels_csv(config.data.labels)

    samples = []
    skipped_outside: list[str] = []
    skipped_unlabeled: list[str] = []
    country_counts: dict[str, int] = {}
    for fp in sorted(footprints, key=lambda f: f.building_id):
        entry = labels.get(fp.building_id)
        if not entry:
            skipped_unlabeled.append(fp.building_id)
            continue
        try:
            rgb_patch = extract_patch(rgb, fp.polygon, scale=config.data.patch_scale)
            lidar_patch = extract_patch(ndsm, fp.polygon, scale=config.data.patch_scale)
        except ExtractionError as exc:
            logger.warning("skipping %s: %s", fp.building_id, exc)
            skipped_outside.append(fp.building_id)
            continue
        samples.append(
            BuildingSample(
                building_id=fp.building_id,
                rgb_patch=rgb_patch,
                lidar_patch=np.maximum(lidar_patch[0], 0.0),
                roof_type=entry.get("roof_type"),
                roof_material=entry.get("roof_material"),
                country_tag=fp.country_tag,
            )
        )
        country_counts[fp.country_tag] = country_counts.get(fp.country_tag, 0) + 1

    store = DatasetStore.create(
        config.data.dataset_dir,
        samples,
        source={
            "mode": "real",
            "rgb_raster": str(config.data.rgb_raster),
            "ndsm": str(config.data.ndsm or f"{config.data.dsm} - {config.data.dtm}"),
            "footprints": str(config.data.footprints),
        },
        extraction={"scale": config.data.patch_scale},
    )

    class_counts: dict[str, dict[str, int]] = {"roof_type": {}, "roof_material": {}}
    for s in samples:
        if s.roof_type is not None:
            name = schema_for("roof_type").name_of(s.roof_type)
            class_counts["roof_type"][name] = class_counts["roof_type"].get(name, 0) + 1
        if s.roof_material is not None:
            name = schema_for("roof_material").name_of(s.roof_material)
            class_counts["roof_material"][name] = class_counts["roof_material"].get(name, 0) + 1

    summary = {
        "total": len(samples),
        "per_country": country_counts,
        "per_class": class_counts,
        "skipped": {
            "outside_raster": len(skipped_outside),
            "unlabeled": len(skipped_unlabeled),
        },
    }
    out_dir = Path(config.output_dir) / "extract"
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "extract_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)

    manifest = RunManifest("extract", config.to_dict())
    manifest.record_output("dataset_manifest_sha256", sha256_file(store.manifest_path))
    manifest.record_output("summary", summary)
    manifest.write(out_dir)
    logger.info(
        "extracted %d samples (%s); skipped %d outside raster, %d unlabeled",
        len(samples),
        ", ".join(f"{k} {v}" for k, v in sorted(country_counts.items())),
        len(skipped_outside),
        len(skipped_unlabeled),
    )
    return 0


# ----------------------------------------------------------------- split


@dataclass
class _ManifestItem:
    building_id: str
    roof_type: int | None
    roof_material: int | None
    country_tag: str


def cmd_split(config: RunConfig) -> int:
    """Assign stratified train/test tags in the dataset manifest."""
    store = DatasetStore(config.data.dataset_dir)
    entries = store.read_manifest()
    type_schema = schema_for("roof_type")
    material_schema = schema_for("roof_material")
    items = [
        _ManifestItem(
            building_id=e["building_id"],
            roof_type=None if e.get("roof_type") is None else type_schema.index_of(e["roof_type"]),
            roof_material=None
            if e.get("roof_material") is None
            else material_schema.index_of(e["roof_material"]),
            country_tag=e.get("country", "Other"),
        )
        for e in entries
    ]
    assignment = stratified_split(
        items,
        config.task,
        train_frac=config.split.train_frac,
        seed=config.component_seed("split"),
        region_constraint=config.split.region_constraint,
    )
    store.update_split(assignment)

    out_dir = Path(config.output_dir) / "split"
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "split_summary.json", "w") as fh:
        json.dump(assignment.to_dict(), fh, indent=2, sort_keys=True)
    manifest = RunManifest("split", config.to_dict())
    manifest.record_output("dataset_manifest_sha256", sha256_file(store.manifest_path))
    manifest.record_output("class_counts", assignment.class_counts)
    manifest.write(out_dir)
    logger.info(
        "split: %d train / %d test (%s)",
        len(assignment.train_ids),
        len(assignment.test_ids),
        ", ".join(f"{k} {v['train']}/{v['test']}" for k, v in sorted(assignment.class_counts.items())),
    )
    return 0


# ----------------------------------------------------------------- train


def cmd_train(config: RunConfig, modality: str, resume: bool = False) -> int:
    """Train one (modality, architecture) model on the train split."""
    if modality not in ("rgb", "lidar"):
        raise ConfigError(f"modality must be rgb or lidar, got {modality!r}")
    _apply_determinism(config)

    store = DatasetStore(config.data.dataset_dir)
    train_samples = store.load_samples(split="train", purpose=f"train_cnn_{modality}")
    if not train_samples:
        raise ConfigError("train split is empty; run the split command first")

    schema = schema_for(config.task)
    ckpt_dir = _checkpoint_dir(config, modality)

    if resume and (ckpt_dir / "model.json").exists():
        model = load_checkpoint(ckpt_dir)
        start_epoch = len(model.history)
        remaining = max(0, config.train.max_epochs - start_epoch)
        tc = _train_config(config, modality, max_epochs=remaining)
        logger.info("resuming %s at epoch %d (%d more epochs)", modality, start_epoch, remaining)
    else:
        spec = _backbone_spec(config, modality)
        provider = None if not spec.pretrained else __default_provider()
        model = build_model(spec, label_schema=schema, weight_provider=provider)
        start_epoch = 0
        tc = _train_config(config, modality)

    train(model, train_samples, config=tc, start_epoch=start_epoch)
    data_hash = sha256_file(store.manifest_path)
    save_checkpoint(model, ckpt_dir, train_config=tc, data_manifest_hash=data_hash)

    manifest = RunManifest("train", config.to_dict())
    manifest.record_input("modality", modality)
    manifest.record_input("dataset_manifest_sha256", data_hash)
    manifest.record_output("model_state_sha256", model_state_hash(model))
    manifest.record_output("epochs_completed", len(model.history))
    manifest.record_output("pretrained_loaded", model.pretrained_loaded)
    manifest.write(Path(config.output_dir) / f"train_{modality}")
    logger.info("checkpoint for %s written to %s", modality, ckpt_dir)
    return 0


def __default_provider():
    from roofclass.models.backbones import torchvision_weight_provider

    return torchvision_weight_provider


# ------------------------------------------------------------- fuse-eval


def _predictions_for_strategy(config, store, models, train_samples, test_samples, out_dir):
    """Test-set predictions plus (cv_table, downstream) for the strategy."""
    strategy = config.fusion.strategy
    task = config.task
    y_train = resolve_labels(train_samples, task)
    train_ids = [s.building_id for s in train_samples]
    test_ids = [s.building_id for s in test_samples]

    def batch(samples, modality):
        side = models[modality].spec.input_side
        return prepare_patches(samples, modality, side)

    if strategy in ("rgb_only", "lidar_only"):
        modality = "rgb" if strategy == "rgb_only" else "lidar"
        probs = predict_softmax(models[modality], batch(test_samples, modality))
        return probs.argmax(axis=1), None, None

    if strategy == "softmax_mean":
        p_rgb = predict_softmax(models["rgb"], batch(test_samples, "rgb"))
        p_lidar = predict_softmax(models["lidar"], batch(test_samples, "lidar"))
        return mean_softmax(p_rgb, p_lidar).argmax(axis=1), None, None

    if strategy == "feature_concat":
        tr = concat_features(
            extract_embeddings(models["rgb"], batch(train_samples, "rgb")),
            extract_embeddings(models["lidar"], batch(train_samples, "lidar")),
            train_ids,
            train_ids,
        )
        te = concat_features(
            extract_embeddings(models["rgb"], batch(test_samples, "rgb")),
            extract_embeddings(models["lidar"], batch(test_samples, "lidar")),
            test_ids,
            test_ids,
        )
        tag = "feature_concat"
        widths = [models["rgb"].spec.embedding_dim, models["lidar"].spec.embedding_dim]
    else:  # softmax_concat
        tr = concat_softmax(
            predict_softmax(models["rgb"], batch(train_samples, "rgb")),
            predict_softmax(models["lidar"], batch(train_samples, "lidar")),
        )
        te = concat_softmax(
            predict_softmax(models["rgb"], batch(test_samples, "rgb")),
            predict_softmax(models["lidar"], batch(test_samples, "lidar")),
        )
        tag = "softmax_concat"
        k = models["rgb"].spec.num_classes
        widths = [k, k]

    records = records_from_matrix(train_ids, tr, tag, y_train)
    protocol = SearchProtocol(
        folds=config.fusion.folds,
        n_random=config.fusion.n_random,
        seed=config.component_seed("search"),
    )
    layout = {"blocks": [["rgb", widths[0]], ["lidar", widths[1]]], "source_tag": tag}
    fitted, best_spec, cv_table = fit_downstream(
        records, config.fusion.downstream, protocol, layout=layout
    )
    save_downstream(fitted, out_dir / "downstream")
    preds = predict_downstream(fitted, te)
    return preds, cv_table, fitted


def cmd_fuse_eval(config: RunConfig) -> int:
    """Fit the configured fusion strategy on train, evaluate once on test."""
    _apply_determinism(config)
    store = DatasetStore(config.data.dataset_dir)
    schema = schema_for(config.task)

    test_entries = [e for e in store.read_manifest() if e.get("split") == "test"]
    if not test_entries:
        raise ConfigError("test split is empty; nothing to evaluate")

    strategy = config.fusion.strategy
    modalities = {
        "rgb_only": ["rgb"],
        "lidar_only": ["lidar"],
    }.get(strategy, ["rgb", "lidar"])

    models = {}
    for modality in modalities:
        ckpt = _checkpoint_dir(config, modality)
        if not (ckpt / "model.json").exists():
            raise ConfigError(f"no {modality} checkpoint at {ckpt}; run the train command first")
        models[modality] = load_checkpoint(ckpt)

    needs_fit = strategy in ("feature_concat", "softmax_concat")
    train_samples = (
        store.load_samples(split="train", purpose="cv_fit") if needs_fit else []
    )
    test_samples = store.load_samples(split="test", purpose="final_eval")

    out_dir = Path(config.output_dir) / "fuse_eval"
    out_dir.mkdir(parents=True, exist_ok=True)

    preds, cv_table, fitted = _predictions_for_strategy(
        config, store, models, train_samples, test_samples, out_dir
    )

    # the split-tagged loads above are the only sample reads; prove it
    leaks = [
        r for r in store.access_log if r.split == "test" and r.purpose in ("cv_fit", "scaler_fit")
    ]
    if leaks:
        raise RoofClassError(f"test-split records touched during fitting: {leaks[:3]}")

    y_true = resolve_labels(test_samples, config.task)
    report = evaluate(y_true, preds, list(schema.classes))

    with open(out_dir / "metrics.json", "w") as fh:
        fh.write(report.to_json())
    table_text = format_report_table(
        [(f"{strategy} ({config.fusion.downstream})" if needs_fit else strategy, report)],
        title=f"task: {config.task}",
    )
    (out_dir / "report.txt").write_text(table_text + "\n")
    print(table_text)

    cv_hash = None
    if cv_table:
        write_cv_table(cv_table, out_dir / "cv_table.csv")
        cv_hash = sha256_file(out_dir / "cv_table.csv")
    store.write_access_log(out_dir / "access_log.jsonl")

    manifest = RunManifest("fuse-eval", config.to_dict())
    manifest.record_input("dataset_manifest_sha256", sha256_file(store.manifest_path))
    for modality, model in models.items():
        manifest.record_input(f"checkpoint_{modality}_sha256", model_state_hash(model))
    manifest.record_output("metrics", report.to_dict())
    manifest.record_output("cv_table_sha256", cv_hash)
    if fitted is not None:
        manifest.record_output("downstream_spec", fitted.spec.to_dict())
    manifest.write(out_dir)
    logger.info("fuse-eval %s: macro F1 %.4f", strategy, report.macro_f1)
    return 0


# ------------------------------------------------------------ predict-map


def cmd_predict_map(
    rgb_checkpoint: str | None,
    rgb_raster_path: str | None,
    footprints_path: str,
    out_path: str,
    lidar_checkpoint: str | None = None,
    lidar_raster_path: str | None = None,
    downstream_dir: str | None = None,
    strategy: str = "rgb_only",
    scale: float = 1.5,
) -> int:
    """Classify supplied footprints and write a GeoJSON map."""
    footprints = load_footprints(footprints_path)
    rgb_model = load_checkpoint(rgb_checkpoint) if rgb_checkpoint else None
    lidar_model = load_checkpoint(lidar_checkpoint) if lidar_checkpoint else None
    rgb = load_raster(rgb_raster_path) if rgb_raster_path else None
    lidar = load_raster(lidar_raster_path) if lidar_raster_path else None
    downstream = load_downstream(downstream_dir) if downstream_dir else None

    refs = [p for p in (rgb_checkpoint, lidar_checkpoint, downstream_dir) if p]
    collection = classify_footprints(
        footprints,
        strategy,
        rgb_model=rgb_model,
        lidar_model=lidar_model,
        rgb_raster=rgb,
        lidar_raster=lidar,
        downstream=downstream,
        scale=scale,
        model_ref=";".join(str(r) for r in refs),
    )
    write_geojson(collection, out_path)
    logger.info("classified map with %d features at %s", len(collection["features"]), out_path)
    return 0


# ---------------------------------------------------------------- report


def cmd_report(paths: list[str]) -> int:
    """Combine metrics.json files (or run dirs) into one comparison table."""
    rows = []
    for raw in paths:
        p = Path(raw)
        candidates = [p, p / "metrics.json", p / "fuse_eval" / "metrics.json"]
        metrics_path = next((c for c in candidates if c.is_file()), None)
        if metrics_path is None:
            raise ConfigError(f"no metrics.json found under {raw}")
        with open(metrics_path) as fh:
            report = MetricsReport.from_dict(json.load(fh))
        rows.append((p.name or str(p), report))
    print(format_report_table(rows, title="collected runs"))
    return 0

"""Downstream classifier search: grid for LR/SVM, randomized for RF.

Search spaces follow the published tuning protocol: penalty in {l1, l2}
and C in {0.001, 0.01, 0.1, 1} for LR and linear SVM (LR additionally
over lbfgs and liblinear solvers), 100..1000 step 50 trees, depth 3..10
and gini/entropy for RF, each crossed with four scaling choices. Model
selection maximizes mean 5-fold CV macro F1; folds are stratified and the
scaler is fit inside each fold on the fold's training rows only.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import joblib
import numpy as np
from sklearn.ensemble import RandomForestClassifier
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import StratifiedKFold
from sklearn.multiclass import OneVsRestClassifier
from sklearn.svm import LinearSVC

from roofclass.fusion.combine import FusionRecord
from roofclass.fusion.scaling import ScalerParams, fit_scaler, scale_features, transform
from roofclass.metrics import confusion_matrix, macro_metrics

logger = logging.getLogger(__name__)

FAMILIES = ("LR", "RF", "SVM")
PENALTIES = ("l1", "l2")
C_VALUES = (0.001, 0.01, 0.1, 1.0)
LR_SOLVERS = ("lbfgs", "liblinear")
RF_N_TREES = tuple(range(100, 1001, 50))
RF_MAX_DEPTHS = tuple(range(3, 11))
RF_CRITERIA = ("gini", "entropy")
SCALERS = ("none", "minmax", "standard", "robust")


@dataclass(frozen=True)
class DownstreamSpec:
    """One candidate configuration for a downstream classifier."""

    family: str
    scaler: str
    penalty: str | None = None
    C: float | None = None
    solver: str | None = None
    n_trees: int | None = None
    max_depth: int | None = None
    criterion: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.scaler not in SCALERS:
            raise ValueError(f"unknown scaler {self.scaler!r}")
        if self.family in ("LR", "SVM"):
            if self.penalty not in PENALTIES or self.C is None:
                raise ValueError(f"{self.family} spec needs penalty and C")
            if self.n_trees or self.max_depth or self.criterion:
                raise ValueError(f"{self.family} spec carries RF fields")
            if self.family == "LR" and self.solver not in LR_SOLVERS:
                raise ValueError("LR spec needs a solver (lbfgs or liblinear)")
            if self.family == "SVM" and self.solver is not None:
                raise ValueError("SVM spec does not take a solver")
        else:
            if self.n_trees is None or self.max_depth is None or self.criterion not in RF_CRITERIA:
                raise ValueError("RF spec needs n_trees, max_depth and criterion")
            if self.penalty or self.C is not None or self.solver:
                raise ValueError("RF spec carries LR/SVM fields")

    def complexity(self) -> tuple:
        """Tie-break key: simpler (more regularized / smaller) first."""
        if self.family == "RF":
            return (self.n_trees, self.max_depth)
        return (self.C,)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "scaler": self.scaler,
            "penalty": self.penalty,
            "C": self.C,
            "solver": self.solver,
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "criterion": self.criterion,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DownstreamSpec":
        return cls(**{k: d.get(k) for k in cls.__dataclass_fields__})


@dataclass
class SearchProtocol:
    folds: int = 5
    n_random: int = 30
    seed: int = 0
    objective: str = "macro_f1"

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("need at least 2 CV folds")
        if self.n_random < 1:
            raise ValueError("n_random must be positive")


def enumerate_grid(family: str) -> list[DownstreamSpec]:
    """Full deterministic grid for LR or SVM; incompatible combos skipped."""
    specs = []
    if family == "LR":
        for penalty, c, solver, scaler in itertools.product(
            PENALTIES, C_VALUES, LR_SOLVERS, SCALERS
        ):
            if penalty == "l1" and solver == "lbfgs":
                continue  # lbfgs only supports l2
            specs.append(
                DownstreamSpec(family="LR", scaler=scaler, penalty=penalty, C=c, solver=solver)
            )
    elif family == "SVM":
        for penalty, c, scaler in itertools.product(PENALTIES, C_VALUES, SCALERS):
            specs.append(DownstreamSpec(family="SVM", scaler=scaler, penalty=penalty, C=c))
    else:
        raise ValueError(f"grid enumeration is for LR/SVM, not {family!r}")
    return specs


def sample_random(family: str, n: int, seed: int) -> list[DownstreamSpec]:
    """n distinct RF settings drawn without replacement from the full space."""
    if family != "RF":
        raise ValueError(f"randomized sampling is for RF, not {family!r}")
    space = [
        DownstreamSpec(
            family="RF", scaler=scaler, n_trees=t, max_depth=d, criterion=criterion
        )
        for t, d, criterion, scaler in itertools.product(
            RF_N_TREES, RF_MAX_DEPTHS, RF_CRITERIA, SCALERS
        )
    ]
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(space), size=min(n, len(space)), replace=False)
    return [space[i] for i in picks]


def build_estimator(spec: DownstreamSpec, seed: int):
    if spec.family == "LR":
        lr = LogisticRegression(
            penalty=spec.penalty,
            C=spec.C,
            solver=spec.solver,
            max_iter=2000,
            random_state=seed,
        )
        if spec.solver == "liblinear":
            # liblinear is a one-vs-rest solver; make that explicit
            return OneVsRestClassifier(lr)
        return lr
    if spec.family == "SVM":
        return LinearSVC(
            penalty=spec.penalty,
            C=spec.C,
            loss="squared_hinge",
            dual=False,
            max_iter=5000,
            random_state=seed,
        )
    return RandomForestClassifier(
        n_estimators=spec.n_trees,
        max_depth=spec.max_depth,
        criterion=spec.criterion,
        random_state=seed,
        n_jobs=1,
    )


@dataclass
class FittedDownstream:
    """Refit classifier plus everything needed to apply it elsewhere."""

    spec: DownstreamSpec
    estimator: object
    scaler_params: ScalerParams
    num_classes: int
    layout: dict = field(default_factory=dict)


def _records_to_arrays(records: list[FusionRecord]):
    if not records:
        raise ValueError("no fusion records supplied")
    width = len(records[0].vector)
    for r in records:
        if len(r.vector) != width:
            raise ValueError(
                f"record {r.building_id} has width {len(r.vector)}, expected {width}"
            )
    x = np.stack([r.vector for r in records])
    y = np.asarray([r.label for r in records], dtype=np.int64)
    ids = [r.building_id for r in records]
    return x, y, ids


def _macro_f1(y_true, y_pred, num_classes: int) -> float:
    return macro_metrics(confusion_matrix(y_true, y_pred, num_classes)).macro_f1


def fit_downstream(
    records: list[FusionRecord],
    family: str,
    protocol: SearchProtocol | None = None,
    candidates: list[DownstreamSpec] | None = None,
    layout: dict | None = None,
) -> tuple[FittedDownstream, DownstreamSpec, list[dict]]:
    """Search, select on mean CV macro F1, refit on all records.

    Ties are broken toward the simpler spec (complexity key), then search
    order. Returns the fitted classifier, the winning spec and the full
    CV table in search order.
    """
    protocol = protocol or SearchProtocol()
    x, y, _ = _records_to_arrays(records)
    num_classes = int(y.max()) + 1

    counts = np.bincount(y, minlength=num_classes)
    present = np.flatnonzero(counts)
    too_small = [int(c) for c in present if counts[c] < protocol.folds]
    if too_small:
        raise ValueError(
            f"classes {too_small} have fewer samples than {protocol.folds} folds"
        )

    if candidates is None:
        if family == "RF":
            candidates = sample_random(family, protocol.n_random, protocol.seed)
        else:
            candidates = enumerate_grid(family)
    if not candidates:
        raise ValueError("empty search space")

    skf = StratifiedKFold(n_splits=protocol.folds, shuffle=True, random_state=protocol.seed)
    fold_indices = list(skf.split(x, y))

    table: list[dict] = []
    for index, spec in enumerate(candidates):
        fold_scores = []
        for train_idx, val_idx in fold_indices:
            x_tr, x_va, _ = scale_features(x[train_idx], x[val_idx], spec.scaler)
            estimator = build_estimator(spec, protocol.seed)
            estimator.fit(x_tr, y[train_idx])
            fold_scores.append(_macro_f1(y[val_idx], estimator.predict(x_va), num_classes))
        row = dict(spec.to_dict())
        row["index"] = index
        row["fold_scores"] = fold_scores
        row["mean_f1"] = float(np.mean(fold_scores))
        row["std_f1"] = float(np.std(fold_scores))
        row["selected"] = False
        table.append(row)
        logger.debug("candidate %d %s: mean F1 %.4f", index, spec, row["mean_f1"])

    best_index = min(
        range(len(candidates)),
        key=lambda i: (-table[i]["mean_f1"], candidates[i].complexity(), i),
    )
    table[best_index]["selected"] = True
    best_spec = candidates[best_index]

    scaler_params = fit_scaler(x, best_spec.scaler)
    estimator = build_estimator(best_spec, protocol.seed)
    estimator.fit(transform(scaler_params, x), y)

    fitted = FittedDownstream(
        spec=best_spec,
        estimator=estimator,
        scaler_params=scaler_params,
        num_classes=num_classes,
        layout=layout or {},
    )
    logger.info("selected %s (mean CV F1 %.4f)", best_spec, table[best_index]["mean_f1"])
    return fitted, best_spec, table


def predict_downstream(fitted: FittedDownstream, records) -> np.ndarray:
    """Class indices for FusionRecords or a raw feature matrix."""
    if isinstance(records, np.ndarray):
        x = records
    else:
        x, _, _ = _records_to_arrays(list(records))
    if x.ndim != 2 or x.shape[1] != fitted.scaler_params.width:
        raise ValueError(
            f"vector width {x.shape[1] if x.ndim == 2 else '?'} does not match "
            f"training width {fitted.scaler_params.width}"
        )
    return np.asarray(fitted.estimator.predict(transform(fitted.scaler_params, x)), dtype=np.int64)


# --------------------------------------------------------------- persistence


def save_downstream(fitted: FittedDownstream, directory: str | os.PathLike) -> Path:
    """joblib model plus a JSON sidecar with scaler and vector layout."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    joblib.dump(fitted.estimator, directory / "classifier.joblib")
    sidecar = {
        "spec": fitted.spec.to_dict(),
        "scaler": fitted.scaler_params.to_dict(),
        "num_classes": fitted.num_classes,
        "layout": fitted.layout,
    }
    with open(directory / "classifier.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
    return directory


def load_downstream(directory: str | os.PathLike) -> FittedDownstream:
    directory = Path(directory)
    with open(directory / "classifier.json") as fh:
        sidecar = json.load(fh)
    return FittedDownstream(
        spec=DownstreamSpec.from_dict(sidecar["spec"]),
        estimator=joblib.load(directory / "classifier.joblib"),
        scaler_params=ScalerParams.from_dict(sidecar["scaler"]),
        num_classes=sidecar["num_classes"],
        layout=sidecar.get("layout", {}),
    )


def write_cv_table(table: list[dict], path: str | os.PathLike) -> Path:
    """CV results as CSV: spec fields, per-fold F1, mean/std, selection."""
    path = Path(path)
    if not table:
        raise ValueError("empty CV table")
    n_folds = len(table[0]["fold_scores"])
    fixed = ["index", "family", "scaler", "penalty", "C", "solver", "n_trees", "max_depth", "criterion"]
    fold_cols = [f"f1_fold{i}" for i in range(n_folds)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fixed + fold_cols + ["mean_f1", "std_f1", "selected"])
        for row in table:
            writer.writerow(
                [row[k] if row[k] is not None else "" for k in fixed]
                + [repr(s) for s in row["fold_scores"]]
                + [repr(row["mean_f1"]), repr(row["std_f1"]), row["selected"]]
            )
    return path

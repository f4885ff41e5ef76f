"""Stratified train/test assignment with an optional test-region constraint."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from roofclass.dataset.labels import resolve_labels, schema_for
from roofclass.errors import SplitError


@dataclass
class SplitAssignment:
    """Result of a stratified split: ids per partition plus bookkeeping."""

    task: str
    train_frac: float
    seed: int
    region_constraint: str | None
    train_ids: list[str]
    test_ids: list[str]
    class_counts: dict[str, dict[str, int]] = field(default_factory=dict)

    def split_of(self, building_id: str) -> str:
        if building_id in self._test_set:
            return "test"
        if building_id in self._train_set:
            return "train"
        return "unassigned"

    def __post_init__(self):
        self._train_set = set(self.train_ids)
        self._test_set = set(self.test_ids)
        overlap = self._train_set & self._test_set
        if overlap:
            raise SplitError(f"ids in both partitions: {sorted(overlap)[:5]}")

    def apply(self, samples) -> None:
        """Tag each sample's split field in place."""
        for s in samples:
            s.split = self.split_of(s.building_id)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "train_frac": self.train_frac,
            "seed": self.seed,
            "region_constraint": self.region_constraint,
            "class_counts": self.class_counts,
            "n_train": len(self.train_ids),
            "n_test": len(self.test_ids),
        }


def _train_quota(n: int, train_frac: float) -> int:
    # round half up keeps |train/total - frac| within one sample
    return int(math.floor(train_frac * n + 0.5))


def stratified_split(
    samples,
    task: str,
    train_frac: float = 0.75,
    seed: int = 0,
    region_constraint: str | None = None,
) -> SplitAssignment:
    """Per-class train/test partition preserving class proportions.

    Every sample must be labeled for `task`. With a region constraint,
    the test partition is drawn entirely from samples carrying that
    country tag; a class without enough constrained samples to fill its
    test quota raises SplitError naming the deficient classes.
    Deterministic for a fixed seed regardless of input order.
    """
    if not 0.0 < train_frac <= 1.0:
        raise SplitError(f"train_frac must be in (0, 1], got {train_frac}")
    schema = schema_for(task)
    try:
        labels = resolve_labels(samples, task)
    except ValueError as exc:
        raise SplitError(str(exc)) from exc

    ordered = sorted(zip(samples, labels), key=lambda pair: pair[0].building_id)
    by_class: dict[int, list] = {}
    for sample, label in ordered:
        by_class.setdefault(int(label), []).append(sample)

    rng = np.random.default_rng(seed)
    train_ids: list[str] = []
    test_ids: list[str] = []
    class_counts: dict[str, dict[str, int]] = {}
    deficits: list[str] = []

    for label in sorted(by_class):
        members = by_class[label]
        n = len(members)
        n_train = _train_quota(n, train_frac)
        n_test = n - n_train
        name = schema.name_of(label)

        if region_constraint is not None:
            eligible = [s for s in members if s.country_tag == region_constraint]
        else:
            eligible = members
        if len(eligible) < n_test:
            deficits.append(
                f"{name} (need {n_test} test samples from {region_constraint}, have {len(eligible)})"
            )
            continue

        pick = rng.choice(len(eligible), size=n_test, replace=False) if n_test else []
        chosen = {eligible[i].building_id for i in np.sort(np.asarray(pick, dtype=int))}
        for s in members:
            (test_ids if s.building_id in chosen else train_ids).append(s.building_id)
        class_counts[name] = {"train": n - len(chosen), "test": len(chosen)}

    if deficits:
        raise SplitError("test quota infeasible for classes: " + "; ".join(deficits))

    return SplitAssignment(
        task=task,
        train_frac=train_frac,
        seed=seed,
        region_constraint=region_constraint,
        train_ids=train_ids,
        test_ids=test_ids,
        class_counts=class_counts,
    )

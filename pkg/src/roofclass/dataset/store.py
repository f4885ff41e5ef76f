"""Packaged dataset on disk: per-sample arrays plus a JSON-lines manifest.

Layout:
    <root>/manifest.jsonl          one canonical-JSON object per sample
    <root>/samples/<id>/rgb.npy    float32 (3, h, w)
    <root>/samples/<id>/lidar.npy  float32 (h, w)

Manifest lines are sorted by building_id and written with sorted keys so
re-extraction with the same inputs is byte-identical. Every sample read
goes through the store and is appended to an access log carrying the
requesting purpose, which is how evaluation runs prove that test-split
records never feed cross-validation or scaler fitting.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from roofclass.dataset.labels import ROOF_MATERIAL_SCHEMA, ROOF_TYPE_SCHEMA
from roofclass.dataset.samples import BuildingSample
from roofclass.dataset.split import SplitAssignment
from roofclass.errors import RoofClassError


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class AccessRecord:
    building_id: str
    split: str
    purpose: str

    def to_dict(self) -> dict:
        return {"building_id": self.building_id, "split": self.split, "purpose": self.purpose}


class DatasetStore:
    """Reader/writer for a packaged dataset directory."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.access_log: list[AccessRecord] = []

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.jsonl"

    @property
    def samples_dir(self) -> Path:
        return self.root / "samples"

    # ------------------------------------------------------------- write
    @classmethod
    def create(
        cls,
        root: str | os.PathLike,
        samples: list[BuildingSample],
        source: dict | None = None,
        extraction: dict | None = None,
    ) -> "DatasetStore":
        store = cls(root)
        store.samples_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        for s in sorted(samples, key=lambda s: s.building_id):
            sample_dir = store.samples_dir / s.building_id
            sample_dir.mkdir(parents=True, exist_ok=True)
            np.save(sample_dir / "rgb.npy", s.rgb_patch)
            np.save(sample_dir / "lidar.npy", s.lidar_patch)
            entries.append(
                {
                    "building_id": s.building_id,
                    "roof_type": None
                    if s.roof_type is None
                    else ROOF_TYPE_SCHEMA.name_of(s.roof_type),
                    "roof_material": None
                    if s.roof_material is None
                    else ROOF_MATERIAL_SCHEMA.name_of(s.roof_material),
                    "country": s.country_tag,
                    "split": s.split,
                    "source": source or s.provenance.get("source") or {},
                    "extraction": extraction or s.provenance.get("extraction") or {},
                }
            )
        with open(store.manifest_path, "w") as fh:
            for entry in entries:
                fh.write(canonical_json(entry) + "\n")
        return store

    def update_split(self, assignment: SplitAssignment) -> None:
        """Rewrite manifest split tags from a SplitAssignment."""
        entries = self.read_manifest()
        for entry in entries:
            entry["split"] = assignment.split_of(entry["building_id"])
        with open(self.manifest_path, "w") as fh:
            for entry in entries:
                fh.write(canonical_json(entry) + "\n")

    # -------------------------------------------------------------- read
    def read_manifest(self) -> list[dict]:
        if not self.manifest_path.exists():
            raise RoofClassError(f"no dataset manifest at {self.manifest_path}")
        with open(self.manifest_path) as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def load_sample(self, entry: dict, purpose: str = "unspecified") -> BuildingSample:
        sample_dir = self.samples_dir / entry["building_id"]
        self.access_log.append(
            AccessRecord(entry["building_id"], entry.get("split", "unassigned"), purpose)
        )
        return BuildingSample(
            building_id=entry["building_id"],
            rgb_patch=np.load(sample_dir / "rgb.npy"),
            lidar_patch=np.load(sample_dir / "lidar.npy"),
            roof_type=None
            if entry.get("roof_type") is None
            else ROOF_TYPE_SCHEMA.index_of(entry["roof_type"]),
            roof_material=None
            if entry.get("roof_material") is None
            else ROOF_MATERIAL_SCHEMA.index_of(entry["roof_material"]),
            country_tag=entry.get("country", "Other"),
            split=entry.get("split", "unassigned"),
            provenance={"source": entry.get("source", {}), "extraction": entry.get("extraction", {})},
        )

    def load_samples(self, split: str | None = None, purpose: str = "unspecified") -> list[BuildingSample]:
        """Load all samples, optionally restricted to one split tag."""
        entries = self.read_manifest()
        if split is not None:
            entries = [e for e in entries if e.get("split") == split]
        return [self.load_sample(e, purpose=purpose) for e in entries]

    # --------------------------------------------------------- audit log
    def write_access_log(self, path: str | os.PathLike) -> Path:
        path = Path(path)
        with open(path, "w") as fh:
            for record in self.access_log:
                fh.write(canonical_json(record.to_dict()) + "\n")
        return path

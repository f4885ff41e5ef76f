"""Run manifests: canonical hashing and reproducibility records.

The manifest's `content` block holds everything that determines a run
(config snapshot, dataset hash, model state hashes, metrics); its hash is
the run's identity. Volatile fields (timestamps) live outside the hashed
block so two reruns of the same seeded command produce the same hash.
"""

from __future__ import annotations

import hashlib
import json
import os
from datetime import datetime, timezone
from pathlib import Path

import roofclass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def model_state_hash(model) -> str:
    """Order-stable hash over all parameter and buffer tensors."""
    h = hashlib.sha256()
    for prefix, module in (("features", model.features), ("head", model.head)):
        state = module.state_dict()
        for name in sorted(state):
            h.update(f"{prefix}.{name}".encode())
            h.update(state[name].numpy().tobytes())
    return h.hexdigest()


class RunManifest:
    def __init__(self, command: str, config_snapshot: dict | None = None):
        self.content: dict = {
            "command": command,
            "version": roofclass.__version__,
            "config": config_snapshot or {},
            "inputs": {},
            "outputs": {},
        }

    def record_input(self, name: str, value) -> None:
        self.content["inputs"][name] = value

    def record_output(self, name: str, value) -> None:
        self.content["outputs"][name] = value

    def content_hash(self) -> str:
        return sha256_text(canonical_json(self.content))

    def write(self, run_dir: str | os.PathLike, filename: str = "manifest.json") -> Path:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        doc = {
            "content": self.content,
            "content_hash": self.content_hash(),
            "recorded_at": datetime.now(timezone.utc).isoformat(),
        }
        path = run_dir / filename
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
        return path

    @staticmethod
    def read_hash(path: str | os.PathLike) -> str:
        with open(path) as fh:
            return json.load(fh)["content_hash"]

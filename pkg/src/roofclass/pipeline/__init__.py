"""Run orchestration: configuration, manifests, commands, CLI, map export."""

from roofclass.pipeline.config import RunConfig, derive_seed, load_config
from roofclass.pipeline.manifest import RunManifest, canonical_json, sha256_file, sha256_text

__all__ = [
    "RunConfig",
    "load_config",
    "derive_seed",
    "RunManifest",
    "canonical_json",
    "sha256_file",
    "sha256_text",
]

"""Structured JSON-lines run logs with a human-readable console mirror."""

from __future__ import annotations

import json
import logging
from pathlib import Path


class JsonLineFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        return json.dumps(
            {
                "ts": self.formatTime(record, "%Y-%m-%dT%H:%M:%S"),
                "level": record.levelname,
                "logger": record.name,
                "message": record.getMessage(),
            },
            sort_keys=True,
        )


def setup_run_logging(run_dir: str | Path | None, verbose: bool = False) -> list[logging.Handler]:
    """Attach console + optional JSONL handlers to the package logger."""
    logger = logging.getLogger("roofclass")
    logger.setLevel(logging.DEBUG)
    handlers: list[logging.Handler] = []

    console = logging.StreamHandler()
    console.setLevel(logging.DEBUG if verbose else logging.INFO)
    console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    handlers.append(console)

    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        jsonl = logging.FileHandler(run_dir / "logs.jsonl")
        jsonl.setLevel(logging.DEBUG)
        jsonl.setFormatter(JsonLineFormatter())
        handlers.append(jsonl)

    for h in handlers:
        logger.addHandler(h)
    return handlers


def teardown_run_logging(handlers: list[logging.Handler]) -> None:
    logger = logging.getLogger("roofclass")
    for h in handlers:
        logger.removeHandler(h)
        h.close()

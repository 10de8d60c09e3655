"""Reproducible run manifests with content digests.

Each CLI command records what it read, what it wrote, and the config
fingerprints in force. The manifest lands via atomic rename only after the
command succeeded, so a manifest on disk always describes finished outputs.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path


def sha256_file(path: str | Path, chunk_size: int = 1 << 20) -> str:
    hasher = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(chunk_size), b""):
            hasher.update(chunk)
    return hasher.hexdigest()


def file_digest(path: str | Path) -> dict:
    path = Path(path)
    return {"path": str(path), "sha256": sha256_file(path), "bytes": path.stat().st_size}


@dataclass
class RunManifest:
    command: str
    tool_version: str
    config_fingerprints: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    duration_seconds: float = 0.0
    created_utc: str = ""
    _started: float = field(default_factory=time.perf_counter, repr=False)

    def add_input(self, name: str, path: str | Path) -> None:
        self.inputs[name] = file_digest(path)

    def add_output(self, name: str, path: str | Path) -> None:
        self.outputs[name] = file_digest(path)

    def finish(self) -> None:
        self.duration_seconds = time.perf_counter() - self._started
        self.created_utc = datetime.now(timezone.utc).isoformat()

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "tool_version": self.tool_version,
            "config_fingerprints": self.config_fingerprints,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "stats": self.stats,
            "duration_seconds": self.duration_seconds,
            "created_utc": self.created_utc,
        }


def write_manifest(manifest: RunManifest, path: str | Path) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    manifest.finish()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=".manifest-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(manifest.to_dict(), fh, indent=2)
            fh.write("\n")
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise

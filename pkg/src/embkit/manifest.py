"""Run manifests: every CLI run records what it was asked to do, content
digests of its input files, the tool version, and timestamps. The manifest
is written before the run starts and finalized when it ends, so an
interrupted run leaves a visible "running" record behind."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return "sha256:" + digest.hexdigest()


def digest_inputs(paths: dict[str, str | os.PathLike]) -> dict[str, str]:
    """Content hashes for the input files a run will read, keyed by flag."""
    return {
        name: sha256_file(p)
        for name, p in paths.items()
        if p is not None and os.path.isfile(p)
    }


@dataclass
class RunManifest:
    subcommand: str
    flags: dict
    seeds: dict
    inputs: dict = field(default_factory=dict)
    version: str = ""
    started_at: str = field(default_factory=_now)
    finished_at: str | None = None
    status: str = "running"
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.version:
            from . import __version__

            self.version = __version__

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "flags": self.flags,
            "seeds": self.seeds,
            "inputs": self.inputs,
            "version": self.version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "status": self.status,
            "outputs": self.outputs,
        }

    def write(self, path):
        parent = os.path.dirname(os.fspath(path))
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, default=str)
            fh.write("\n")

    def finalize(self, path, status: str = "completed",
                 outputs: dict | None = None):
        self.status = status
        self.finished_at = _now()
        if outputs:
            self.outputs.update(outputs)
        self.write(path)


def load_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)

"""Run manifests: config snapshot, seed, version and output checksums."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .. import __version__
from .scenarios import ScenarioResult

MANIFEST_NAME = "manifest.json"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    scenario: str
    config: dict
    seed: int
    version: str = __version__
    checksums: dict[str, str] = field(default_factory=dict)

    @classmethod
    def for_result(cls, result: ScenarioResult) -> "RunManifest":
        return cls(result.scenario, result.config.snapshot(), result.config.seed, __version__,
                   {name: sha256_text(text) for name, text in sorted(result.outputs.items())})

    def to_json(self) -> str:
        # no timestamps or host data: identical runs give identical manifests
        return json.dumps({"scenario": self.scenario, "config": self.config, "seed": self.seed,
                           "version": self.version, "checksums": self.checksums},
                          sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        return cls(d["scenario"], d["config"], d["seed"], d["version"], d["checksums"])

    def verify(self, directory: str | Path) -> list[str]:
        """Names of outputs whose file content no longer matches its checksum."""
        bad = []
        for name, digest in self.checksums.items():
            path = Path(directory) / name
            if not path.exists() or sha256_text(path.read_text()) != digest:
                bad.append(name)
        return bad


def write_result(result: ScenarioResult, directory: str | Path) -> RunManifest:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(result.outputs.items()):
        (out / name).write_text(text)
    manifest = RunManifest.for_result(result)
    (out / MANIFEST_NAME).write_text(manifest.to_json())
    return manifest

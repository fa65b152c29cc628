"""Run manifest: per-stage input/output content hashes and stage skipping.

Every artifact file a stage writes is listed with its SHA-256; a stage can
be skipped when its configuration hash, input hashes and output hashes all
still match, which makes re-runs idempotent without relying on timestamps.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

MANIFEST_NAME = "manifest.json"


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(str(path), "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def hash_config(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


class RunManifest:
    def __init__(self, out_dir, tool_version: str):
        self.out_dir = Path(out_dir)
        self.path = self.out_dir / MANIFEST_NAME
        self.data = {"tool_version": tool_version, "stages": {}}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                self.data = json.load(fh)
            self.data["tool_version"] = tool_version

    def _relative(self, path) -> str:
        path = Path(path)
        try:
            return path.relative_to(self.out_dir).as_posix()
        except ValueError:
            return path.as_posix()

    def stage_unchanged(self, stage: str, config_hash: str, inputs) -> bool:
        """True when the stage ran before with identical config, inputs and
        outputs that still hash-match on disk."""
        entry = self.data["stages"].get(stage)
        if not entry or entry.get("config_hash") != config_hash:
            return False
        recorded_inputs = entry.get("inputs", {})
        current = {self._relative(p): sha256_file(p) for p in inputs if Path(p).exists()}
        if len(current) != len(inputs) or recorded_inputs != current:
            return False
        for rel, digest in entry.get("outputs", {}).items():
            full = self.out_dir / rel
            if not full.exists() or sha256_file(full) != digest:
                return False
        return True

    def record_stage(self, stage: str, config_hash: str, inputs, outputs,
                     seconds: float, seeds: dict | None = None) -> None:
        self.data["stages"][stage] = {
            "config_hash": config_hash,
            "inputs": {self._relative(p): sha256_file(p) for p in inputs},
            "outputs": {self._relative(p): sha256_file(p) for p in outputs},
            "wall_time_s": round(seconds, 3),
            "recorded_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "seed_derivations": seeds or {},
        }
        self.save()

    def artifact_hashes(self) -> dict:
        """Union of all recorded output hashes keyed by relative path."""
        merged = {}
        for entry in self.data["stages"].values():
            merged.update(entry.get("outputs", {}))
        return merged

    def verify(self) -> list:
        """Return a list of problems (empty when every artifact hash checks)."""
        problems = []
        for stage, entry in self.data["stages"].items():
            for rel, digest in entry.get("outputs", {}).items():
                full = self.out_dir / rel
                if not full.exists():
                    problems.append(f"{stage}: missing artifact {rel}")
                elif sha256_file(full) != digest:
                    problems.append(f"{stage}: hash mismatch for {rel}")
        return problems

    def save(self) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", encoding="utf-8") as fh:
            json.dump(self.data, fh, sort_keys=True, indent=2)
            fh.write("\n")

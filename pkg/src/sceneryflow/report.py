"""Run manifests and delimited output.

Every run writes its tables as CSV files plus one manifest.json recording
the configuration hash, seed, depth/resolution/dt parameters, tool version
and per-stage timings.  Each CSV row carries the run id, so every table
references exactly one manifest; timings live only in the manifest and are
excluded from byte-for-byte determinism comparisons.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__


class RunManifest:
    def __init__(self, config_path: Optional[Path], seed: int, params: dict):
        config_bytes = Path(config_path).read_bytes() if config_path else b""
        self.config_hash = hashlib.sha256(config_bytes).hexdigest()
        self.seed = seed
        self.params = dict(params)
        ident = json.dumps({"config": self.config_hash, "seed": seed,
                            "params": self.params}, sort_keys=True)
        self.run_id = hashlib.sha256(ident.encode()).hexdigest()[:12]
        self.timings: dict = {}
        self.artifacts: List[str] = []
        self._stage_start = None

    def stage(self, name: str):
        return _Stage(self, name)

    def record_artifact(self, path: Path):
        self.artifacts.append(Path(path).name)

    def write(self, out_dir: Path):
        payload = {
            "run_id": self.run_id,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "params": self.params,
            "tool_version": __version__,
            "artifacts": sorted(self.artifacts),
            "timings_seconds": self.timings,
        }
        path = Path(out_dir) / "manifest.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path


class _Stage:
    def __init__(self, manifest: RunManifest, name: str):
        self.manifest = manifest
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.manifest.timings[self.name] = round(time.perf_counter() - self.t0, 4)
        return False


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(out_dir: Path, name: str, rows: Sequence[dict],
              manifest: RunManifest, fieldnames: Optional[List[str]] = None) -> Path:
    """Write rows with a run_id column; deterministic formatting."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    if rows and fieldnames is None:
        fieldnames = list(rows[0].keys())
    fieldnames = ["run_id"] + [f for f in (fieldnames or []) if f != "run_id"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            out = {k: _fmt(v) for k, v in row.items()}
            out["run_id"] = manifest.run_id
            writer.writerow(out)
    manifest.record_artifact(path)
    return path

"""Run-directory output: deterministic CSV payloads and a JSON manifest.

CSV cells use 17-significant-digit shortest-round-trip formatting so a
rerun with the same configuration and seed is byte-identical.  The only
timestamps live in the manifest, which is written first (status
"running") and rewritten as files land, so interrupted runs leave a
parseable record with partial outputs flagged.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MANIFEST_NAME = "run_manifest.json"


def format_float(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> int:
    """Write named columns; returns the number of data rows."""
    n = len(columns[0])
    for name, col in zip(header, columns):
        if len(col) != n:
            raise ValueError(f"column {name} has length {len(col)} != {n}")
    lines = [",".join(header)]
    for row in range(n):
        lines.append(",".join(format_float(col[row]) for col in columns))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return n


@dataclass
class RunManifest:
    """Manifest-first bookkeeping for one run directory."""

    outdir: Path
    scenario: dict
    seed: int
    version: str
    rng: str
    backend: str
    files: list[dict] = field(default_factory=list)
    status: str = "running"
    started: float = field(default_factory=time.time)

    def __post_init__(self):
        self.outdir = Path(self.outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self._write()

    def _write(self):
        payload = {
            "artifact": "zeno-nh",
            "version": self.version,
            "rng": self.rng,
            "backend": self.backend,
            "seed": self.seed,
            "scenario": self.scenario,
            "status": self.status,
            "started_unix": self.started,
            "files": self.files,
        }
        if self.status != "running":
            payload["finished_unix"] = time.time()
        (self.outdir / MANIFEST_NAME).write_text(
            json.dumps(payload, indent=2, default=_json_fallback), encoding="utf-8"
        )

    def start_file(self, name: str, engine: str, kind: str) -> Path:
        self.files.append({"name": name, "engine": engine, "kind": kind, "status": "partial"})
        self._write()
        return self.outdir / name

    def finish_file(self, name: str, **meta):
        for entry in self.files:
            if entry["name"] == name:
                entry["status"] = "written"
                entry.update(meta)
                break
        self._write()

    def finalize(self, ok: bool = True):
        self.status = "complete" if ok else "failed"
        self._write()


def _json_fallback(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise TypeError(f"cannot serialize {type(obj)}")

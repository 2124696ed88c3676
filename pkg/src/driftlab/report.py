"""Run artifacts: stable run ids, the experiment report, and CSV writers.

Every command writes into runs/<run_id>/ where the id is a hash of the
effective configuration (including the seed), so identical invocations map
to identical directories and any parameter change gets a fresh one.
CSV output is plain RFC-4180 with a header row and '.' decimals.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "run_id",
    "ExperimentReport",
    "write_samples_csv",
    "write_loss_csv",
    "write_frequencies_csv",
]


def run_id(config: dict) -> str:
    """Stable 12-hex-digit id for a JSON-serializable configuration."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


@dataclass
class ExperimentReport:
    """Summary of one command run, serialized as report.json in the run dir."""

    command: str
    config: dict
    run_id: str
    outputs: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    error: str = ""

    def add_output(self, name: str, path: Path) -> None:
        self.outputs[name] = path.name

    def to_dict(self) -> dict:
        doc = {
            "command": self.command,
            "run_id": self.run_id,
            "config": self.config,
            "outputs": self.outputs,
            "summary": _jsonable(self.summary),
            "timings": {k: round(v, 4) for k, v in self.timings.items()},
        }
        if self.error:
            doc["error"] = self.error
        return doc

    def write(self, run_dir: Path) -> Path:
        if not self.error:
            for name, fname in self.outputs.items():
                p = run_dir / fname
                if not p.is_file() or p.stat().st_size == 0:
                    raise RuntimeError(f"declared output {name!r} missing or empty: {p}")
        path = run_dir / "report.json"
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
        return path


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


class Timer:
    """Accumulates wall-clock section timings into a report."""

    def __init__(self, report: ExperimentReport, name: str):
        self.report = report
        self.name = name

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.report.timings[self.name] = time.perf_counter() - self._start
        return False


def write_samples_csv(path, samples) -> None:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(samples.shape[1])])
        for row in samples:
            writer.writerow([repr(float(v)) for v in row])


def write_loss_csv(path, losses) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for i, v in enumerate(losses):
            writer.writerow([i, repr(float(v))])


def write_frequencies_csv(path, freqs, unabsorbed: int, n: int) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["point", "frequency"])
        for i, f in enumerate(freqs):
            writer.writerow([i + 1, repr(float(f))])
        writer.writerow(["unabsorbed", repr(unabsorbed / n)])

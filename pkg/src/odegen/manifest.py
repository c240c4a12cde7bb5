"""Run manifests and metric logs.

A manifest records everything needed to re-execute a run: the command, the
resolved argument snapshot, the code version, and where the outputs went.
Metric logs are plain CSV `step,metric,value` with round-trip float
formatting, so a deterministic rerun reproduces the file byte for byte.
"""

from __future__ import annotations

import csv
import json
import subprocess
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .exceptions import ContractError

MANIFEST_NAME = "manifest.json"
METRICS_NAME = "metrics.csv"


def version_string() -> str:
    """git-describe of the working tree, or the package version when not in a repo."""
    root = Path(__file__).resolve().parents[2]
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=root, capture_output=True, text=True, timeout=10,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.TimeoutExpired):
        pass
    from . import __version__

    return f"odegen-{__version__}"


@dataclass
class RunManifest:
    command: str
    arguments: dict
    version: str = field(default_factory=version_string)
    created: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    wall_seconds: float = 0.0
    metrics_csv: str | None = None
    checkpoints: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def save(self, out_dir) -> Path:
        path = Path(out_dir) / MANIFEST_NAME
        path.write_text(json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        raw = json.loads(path.read_text())
        known = {k for k in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ContractError(f"manifest {path}: unknown fields {sorted(unknown)}")
        return cls(**raw)


class MetricLogger:
    """CSV metric writer; one `step,metric,value` row per call."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(["step", "metric", "value"])

    def log(self, step: int, metric: str, value) -> None:
        self._writer.writerow([step, metric, repr(float(value))])

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self) -> "MetricLogger":
        return self

    def __exit__(self, *exc) -> bool:
        self.close()
        return False


def read_metrics(path) -> list[tuple[int, str, float]]:
    """Parse a metric CSV back into (step, metric, value) rows."""
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["step", "metric", "value"]:
            raise ContractError(f"{path}: not a metric log (header {header})")
        for step, metric, value in reader:
            rows.append((int(step), metric, float(value)))
    return rows

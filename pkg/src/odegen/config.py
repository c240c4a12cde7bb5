"""Run configuration: a flat JSON file with validated, defaulted keys."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .exceptions import ConfigError

EXPERIMENTS = ("pendulum", "stage1", "stage2")
PRESETS = ("desk", "table-ref")
SOLVER_METHODS = ("euler", "rk4", "dopri5")

ENV_OUT_ROOT = "ODEGEN_OUT_ROOT"


def default_out_root() -> str:
    return os.environ.get(ENV_OUT_ROOT, "runs")


@dataclass
class RunConfig:
    """One training or sampling run, fully determined by these keys."""

    experiment: str = "stage1"
    preset: str = "desk"
    seed: int = 0
    lr: float = 2e-4
    batch_size: int = 16
    steps: int = 300
    lambda_gp: float = 10.0
    lambda_div_initial: float = 1.0
    lambda_div_pixel: float = 1.0
    d_steps_per_g: int = 2
    solver_method: str = "rk4"
    solver_substeps: int = 4
    out_dir: str = ""

    def validated(self) -> "RunConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.preset not in PRESETS:
            raise ConfigError(f"preset: must be one of {PRESETS}, got {self.preset!r}")
        if self.seed < 0:
            raise ConfigError(f"seed: must be >= 0, got {self.seed}")
        if not self.lr > 0:
            raise ConfigError(f"lr: must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size: must be >= 1, got {self.batch_size}")
        if self.steps < 1:
            raise ConfigError(f"steps: must be >= 1, got {self.steps}")
        if self.lambda_gp < 0:
            raise ConfigError(f"lambda_gp: must be >= 0, got {self.lambda_gp}")
        if self.lambda_div_initial < 0:
            raise ConfigError(f"lambda_div_initial: must be >= 0, got {self.lambda_div_initial}")
        if self.lambda_div_pixel < 0:
            raise ConfigError(f"lambda_div_pixel: must be >= 0, got {self.lambda_div_pixel}")
        if self.d_steps_per_g < 1:
            raise ConfigError(f"d_steps_per_g: must be >= 1, got {self.d_steps_per_g}")
        if self.solver_method not in SOLVER_METHODS:
            raise ConfigError(f"solver_method: must be one of {SOLVER_METHODS}, got {self.solver_method!r}")
        if self.solver_substeps < 1:
            raise ConfigError(f"solver_substeps: must be >= 1, got {self.solver_substeps}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


_INT_KEYS = {"seed", "batch_size", "steps", "d_steps_per_g", "solver_substeps"}
_FLOAT_KEYS = {"lr", "lambda_gp", "lambda_div_initial", "lambda_div_pixel"}


def config_from_dict(raw: dict) -> RunConfig:
    """Build a validated RunConfig; unknown keys are rejected by name."""
    known = {f.name for f in fields(RunConfig)}
    clean = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"{key}: unknown configuration key")
        try:
            if key in _INT_KEYS:
                if isinstance(value, float) and value != int(value):
                    raise ValueError("not an integer")
                value = int(value)
            elif key in _FLOAT_KEYS:
                value = float(value)
            elif not isinstance(value, str):
                raise ValueError("expected a string")
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc} (got {value!r})") from exc
        clean[key] = value
    return RunConfig(**clean).validated()


def load_config(path) -> RunConfig:
    """Parse a flat JSON config file; an empty file yields all defaults."""
    text = Path(path).read_text().strip()
    if not text:
        return RunConfig().validated()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return config_from_dict(raw)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")

"""Tool configuration: a flat key=value file with CLI flag overrides."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    """Raised for unknown keys or unparseable values in a config file."""


@dataclass(frozen=True)
class ToolConfig:
    # Filter bank
    num_scales: int = 3
    dirs_per_scale: int = 6
    kernel_size: int = 5
    freq_grid: int = 64
    normalize: bool = True
    # Anchor estimation
    anchors_k: int = 6
    restarts: int = 10
    seed: int = 0
    # Evaluation
    iou_threshold: float = 0.5
    score_min: float = 0.5
    small_max: float = 1024.0
    medium_max: float = 9216.0
    fppi_per_image: bool = False
    eleven_point_ap: bool = False
    # Schedule and augmentation gate
    eta_min: float = 0.0001
    eta_max: float = 0.001
    total_iterations: int = 1000
    zeta: float = 0.7


_FIELD_TYPES = {f.name: f.type for f in fields(ToolConfig)}


def _parse_value(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if kind in ("bool", bool):
        lowered = raw.lower()
        if lowered in ("true", "on", "1", "yes"):
            return True
        if lowered in ("false", "off", "0", "no"):
            return False
        raise ConfigError(f"key '{key}': expected a boolean, got '{raw}'")
    try:
        if kind in ("int", int):
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"key '{key}': {exc}") from exc


def load_config(path: str | Path) -> ToolConfig:
    """Parse a key=value config file; unknown keys are rejected."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got '{stripped}'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        values[key] = _parse_value(key, raw)
    return ToolConfig(**values)

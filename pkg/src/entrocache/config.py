"""Run configuration: defaults, flat key=value config files, overrides."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import InputError

ATTENTION_SOURCES = ("previous-frame", "same-frame")
SELECTION_MODES = ("dynamic", "static", "visual", "attention")
OVERLAY_FORMATS = ("png", "pgm")


@dataclass
class RunConfig:
    """Every knob of a pipeline run; defaults mirror the reference setup."""

    grid_rows: int = 16
    grid_cols: int = 16
    g_levels: int = 256
    k1: int = 40
    k2: int = 60
    total_steps: int = 100
    tau: float = 0.996
    flops_per_token: float = 1.0
    fixed_flops: float = 0.0
    attn_source: str = "previous-frame"
    selection_mode: str = "dynamic"
    seed: int = 2024
    max_frames: int = 0  # 0 means all frames the scene provides
    scene_dir: str = ""
    out_dir: str = ""
    overlay_format: str = "png"
    write_overlays: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise InputError("grid must be at least 1x1")
        if self.g_levels < 2:
            raise InputError("g-levels must be at least 2")
        if self.k1 < 0 or self.k2 < self.k1:
            raise InputError("need 0 <= k1 <= k2")
        if self.total_steps < 1:
            raise InputError("T must be at least 1")
        if not -1.0 <= self.tau <= 1.0:
            raise InputError("tau must lie in [-1, 1]")
        if self.flops_per_token < 0 or self.fixed_flops < 0:
            raise InputError("cost terms must be nonnegative")
        if self.attn_source not in ATTENTION_SOURCES:
            raise InputError(
                f"attn-source must be one of {ATTENTION_SOURCES}, got {self.attn_source!r}"
            )
        if self.selection_mode not in SELECTION_MODES:
            raise InputError(
                f"mode must be one of {SELECTION_MODES}, got {self.selection_mode!r}"
            )
        if self.overlay_format not in OVERLAY_FORMATS:
            raise InputError(
                f"overlay-format must be one of {OVERLAY_FORMATS}, got {self.overlay_format!r}"
            )
        if self.max_frames < 0:
            raise InputError("max-frames must be nonnegative")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _coerce(name: str, raw: str, target_type: type):
    if target_type is bool:
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise InputError(f"config key {name}: cannot parse {raw!r} as bool")
    try:
        return target_type(raw)
    except ValueError:
        raise InputError(
            f"config key {name}: cannot parse {raw!r} as {target_type.__name__}"
        )


def read_config_file(path: str | Path) -> dict:
    """Parse a flat key=value config file; '#' starts a comment line."""
    defaults = RunConfig()
    types = {f.name: type(getattr(defaults, f.name)) for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in types:
            raise InputError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw.strip(), types[key])
    return values


def build_config(file_path: str | Path | None = None, **overrides) -> RunConfig:
    """Defaults, then config-file entries, then explicit overrides."""
    merged: dict = {}
    if file_path is not None:
        merged.update(read_config_file(file_path))
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**merged)
    except TypeError as exc:
        raise InputError(f"bad configuration: {exc}") from exc

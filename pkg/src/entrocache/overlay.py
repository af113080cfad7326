"""Token overlays: tint important regions purple and reusable ones green."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DimensionMismatch
from .frames import Frame, PatchGrid
from .imageio import write_png_rgb, write_pgm
from .selection import TokenSets

PURPLE = (128, 0, 128)
GREEN = (0, 128, 0)


def _tint(region: np.ndarray, color: tuple[int, int, int]) -> np.ndarray:
    # Integer half-blend keeps the output deterministic across platforms.
    gray = region.astype(np.int64)
    out = np.empty(region.shape[:2] + (3,), dtype=np.uint8)
    for channel, level in enumerate(color):
        out[:, :, channel] = (gray + level) // 2
    return out


def render_overlay(frame: Frame, sets: TokenSets, grid: PatchGrid) -> np.ndarray:
    """RGB overlay of one frame; untinted regions stay pure grayscale."""
    if frame.height != grid.frame_height or frame.width != grid.frame_width:
        raise DimensionMismatch(
            f"frame {frame.width}x{frame.height} does not match grid "
            f"{grid.frame_width}x{grid.frame_height}"
        )
    gray = frame.pixels.astype(np.uint8)
    rgb = np.repeat(gray[:, :, np.newaxis], 3, axis=2)
    for token in sets.important_set | sets.reuse_set:
        row0, row1, col0, col1 = grid.region_bounds(token)
        color = PURPLE if token in sets.important_set else GREEN
        rgb[row0:row1, col0:col1] = _tint(gray[row0:row1, col0:col1], color)
    return rgb


def save_overlay(
    rgb: np.ndarray, path_base: str | Path, image_format: str = "png"
) -> list[Path]:
    """Write an overlay as one PNG or as a PGM triplet (one file per channel)."""
    base = Path(path_base)
    if image_format == "png":
        path = base.with_suffix(".png")
        write_png_rgb(rgb, path)
        return [path]
    if image_format == "pgm":
        paths = []
        for channel, suffix in enumerate(("_r", "_g", "_b")):
            path = base.with_name(base.name + suffix).with_suffix(".pgm")
            write_pgm(Frame(pixels=rgb[:, :, channel]), path)
            paths.append(path)
        return paths
    raise ValueError(f"unknown overlay format {image_format!r}")

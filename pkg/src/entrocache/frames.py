"""Grayscale frames, patch grids, and per-patch gray-level histograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyHistogram, NonDivisibleGrid, TokenOutOfRange

# BT.601 luma weights in thousandths. Integer arithmetic makes the
# round-half-up result identical on every platform; float evaluation can
# land on the wrong side of an exact .5 boundary.
_LUMA_R = 299
_LUMA_G = 587
_LUMA_B = 114


def to_grayscale(r: int, g: int, b: int) -> int:
    """BT.601 luma of an 8-bit RGB triple, rounded half-up.

    Channels outside [0, 255] are clamped before weighting.
    """
    r = min(255, max(0, int(r)))
    g = min(255, max(0, int(g)))
    b = min(255, max(0, int(b)))
    return (_LUMA_R * r + _LUMA_G * g + _LUMA_B * b + 500) // 1000


def rgb_to_gray_array(rgb: np.ndarray) -> np.ndarray:
    """Vectorized :func:`to_grayscale` over an (H, W, 3) uint8 array."""
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) array, got shape {rgb.shape}")
    channels = rgb.astype(np.int64)
    weighted = (
        _LUMA_R * channels[:, :, 0]
        + _LUMA_G * channels[:, :, 1]
        + _LUMA_B * channels[:, :, 2]
        + 500
    ) // 1000
    return weighted.astype(np.uint8)


@dataclass(frozen=True)
class Frame:
    """One grayscale frame of a rollout.

    ``pixels`` is a read-only (height, width) integer array; ``frame_index``
    is the frame's position in the timestep order.
    """

    pixels: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        pixels = np.ascontiguousarray(self.pixels)
        if pixels.ndim != 2:
            raise ValueError(f"pixels must be 2-D, got {pixels.ndim}-D")
        if pixels.size == 0:
            raise ValueError("frame must contain at least one pixel")
        if not np.issubdtype(pixels.dtype, np.integer):
            raise ValueError(f"pixels must be integers, got dtype {pixels.dtype}")
        if pixels.min() < 0:
            raise ValueError("negative gray level")
        if self.frame_index < 0:
            raise ValueError("frame_index must be nonnegative")
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class PatchGrid:
    """A rows x cols tiling of a frame into rectangular patch tokens.

    Token i covers the contiguous block at (i // cols, i % cols); regions
    are disjoint and jointly exhaustive by construction.
    """

    rows: int
    cols: int
    patch_height: int
    patch_width: int

    def __post_init__(self):
        for name in ("rows", "cols", "patch_height", "patch_width"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def num_tokens(self) -> int:
        return self.rows * self.cols

    @property
    def frame_height(self) -> int:
        return self.rows * self.patch_height

    @property
    def frame_width(self) -> int:
        return self.cols * self.patch_width

    def region_bounds(self, token: int) -> tuple[int, int, int, int]:
        """Pixel bounds (row0, row1, col0, col1) of a token, end-exclusive."""
        if not 0 <= token < self.num_tokens:
            raise TokenOutOfRange(
                f"token {token} outside grid of {self.num_tokens} tokens"
            )
        grid_row, grid_col = divmod(token, self.cols)
        row0 = grid_row * self.patch_height
        col0 = grid_col * self.patch_width
        return row0, row0 + self.patch_height, col0, col0 + self.patch_width

    def patch_view(self, frame: Frame, token: int) -> np.ndarray:
        """Read-only view of the token's pixel block."""
        if frame.height != self.frame_height or frame.width != self.frame_width:
            raise NonDivisibleGrid(
                f"frame {frame.width}x{frame.height} does not match grid "
                f"{self.frame_width}x{self.frame_height}"
            )
        row0, row1, col0, col1 = self.region_bounds(token)
        return frame.pixels[row0:row1, col0:col1]


def partition(frame: Frame, rows: int, cols: int) -> PatchGrid:
    """Tile a frame into rows x cols patch tokens in row-major order.

    Raises :class:`NonDivisibleGrid` when the frame dimensions are not
    divisible; the caller must resize or pad upstream.
    """
    if rows <= 0 or cols <= 0:
        raise ValueError("rows and cols must be positive")
    if frame.height % rows != 0 or frame.width % cols != 0:
        raise NonDivisibleGrid(
            f"{rows}x{cols} grid does not divide a "
            f"{frame.width}x{frame.height} frame"
        )
    return PatchGrid(
        rows=rows,
        cols=cols,
        patch_height=frame.height // rows,
        patch_width=frame.width // cols,
    )


@dataclass(frozen=True)
class GrayHistogram:
    """Gray-level counts of one patch; ``sum(counts) == total``."""

    counts: np.ndarray
    total: int

    def __post_init__(self):
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if counts.ndim != 1:
            raise ValueError("counts must be 1-D")
        if counts.size < 1:
            raise ValueError("histogram needs at least one level")
        if counts.min() < 0:
            raise ValueError("negative count")
        if int(counts.sum()) != self.total:
            raise ValueError(
                f"counts sum to {int(counts.sum())}, expected total {self.total}"
            )
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def num_levels(self) -> int:
        return int(self.counts.size)

    def probabilities(self) -> np.ndarray:
        """Per-level probabilities counts / total."""
        if self.total == 0:
            raise EmptyHistogram("histogram has zero pixels")
        return self.counts / self.total


def patch_histogram(
    frame: Frame, grid: PatchGrid, token: int, g_levels: int = 256
) -> GrayHistogram:
    """Count gray levels inside one token's patch region."""
    if g_levels < 2:
        raise ValueError("g_levels must be at least 2")
    patch = grid.patch_view(frame, token)
    if int(patch.max()) >= g_levels:
        raise ValueError(
            f"patch holds level {int(patch.max())} but only {g_levels} levels configured"
        )
    counts = np.bincount(patch.ravel(), minlength=g_levels).astype(np.int64)
    return GrayHistogram(counts=counts, total=int(patch.size))

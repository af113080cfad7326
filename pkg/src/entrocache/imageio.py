"""Frame input/output: binary PGM (P5), 8-bit PNG, and frame manifests."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FileFormatError
from .frames import Frame, rgb_to_gray_array

_IMAGE_SUFFIXES = (".pgm", ".png")


def _read_pgm_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Next header token, skipping whitespace and # comments."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise FileFormatError("truncated PGM header")
    return data[start:pos], pos


def read_pgm(path: str | os.PathLike, frame_index: int = 0) -> Frame:
    """Read a binary PGM (P5) file with single-byte samples."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise FileFormatError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _read_pgm_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise FileFormatError(f"{path}: non-numeric PGM header field {token!r}")
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise FileFormatError(f"{path}: bad PGM dimensions {width}x{height}")
    if not 1 <= maxval <= 255:
        raise FileFormatError(f"{path}: PGM maxval {maxval} unsupported (need 1..255)")
    pos += 1  # exactly one whitespace byte separates header and raster
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise FileFormatError(f"{path}: PGM raster truncated")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    if int(pixels.max()) > maxval:
        raise FileFormatError(f"{path}: sample exceeds declared maxval {maxval}")
    return Frame(pixels=pixels, frame_index=frame_index)


def write_pgm(frame: Frame, path: str | os.PathLike) -> None:
    """Write a frame as binary PGM (P5, maxval 255)."""
    if int(frame.pixels.max()) > 255:
        raise FileFormatError("PGM output limited to 8-bit gray levels")
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    body = np.ascontiguousarray(frame.pixels, dtype=np.uint8).tobytes()
    Path(path).write_bytes(header + body)


def read_png(path: str | os.PathLike, frame_index: int = 0) -> Frame:
    """Read an 8-bit grayscale or 8-bit RGB PNG; RGB is converted to luma."""
    with Image.open(path) as img:
        if img.format != "PNG":
            raise FileFormatError(f"{path}: not a PNG file")
        if img.mode == "L":
            pixels = np.asarray(img, dtype=np.uint8)
        elif img.mode == "RGB":
            pixels = rgb_to_gray_array(np.asarray(img, dtype=np.uint8))
        else:
            raise FileFormatError(
                f"{path}: PNG mode {img.mode!r} unsupported (need 8-bit L or RGB)"
            )
    return Frame(pixels=pixels, frame_index=frame_index)


def write_png_rgb(rgb: np.ndarray, path: str | os.PathLike) -> None:
    """Write an (H, W, 3) uint8 array as an RGB PNG."""
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError("expected (H, W, 3) uint8 array")
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG")


def load_frame(path: str | os.PathLike, frame_index: int = 0) -> Frame:
    """Load a single frame, dispatching on the file suffix."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        return read_pgm(path, frame_index)
    if suffix == ".png":
        return read_png(path, frame_index)
    raise FileFormatError(f"{path}: unsupported frame format {suffix!r}")


def read_manifest(path: str | os.PathLike) -> list[Path]:
    """Frame paths from a manifest: one path per line, UTF-8, '#' comments.

    Relative entries resolve against the manifest's directory.
    """
    base = Path(path).parent
    paths = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        entry = Path(line)
        paths.append(entry if entry.is_absolute() else base / entry)
    if not paths:
        raise FileFormatError(f"{path}: manifest lists no frames")
    return paths


def load_frame_sequence(path: str | os.PathLike) -> list[Frame]:
    """Load a frame sequence in timestep order.

    A directory is read as its lexicographically ordered image files; any
    other file is treated as a manifest unless it is itself an image.
    """
    p = Path(path)
    if p.is_dir():
        files = sorted(
            child
            for child in p.iterdir()
            if child.suffix.lower() in _IMAGE_SUFFIXES
        )
        if not files:
            raise FileFormatError(f"{path}: directory holds no .pgm/.png frames")
    elif p.suffix.lower() in _IMAGE_SUFFIXES:
        files = [p]
    else:
        files = read_manifest(p)
    return [load_frame(f, frame_index=i) for i, f in enumerate(files)]

"""Binary tensor container plus a JSON form for small attention tensors.

Layout: a fixed 32-byte header (4-byte magic, then version and four
dimensions as little-endian uint32, then 8 zero pad bytes) followed by
prod(dims) little-endian float64 values in row-major order of the dims.

Magics: ``ATTN`` for (layers, heads, text, visual) attention scores,
``EMBD`` for (tokens, d_model, 1, 1) embeddings, ``WGHT`` for
(rows, cols, 1, 1) projection matrices.
"""

from __future__ import annotations

import json
import os
import struct
from math import prod
from pathlib import Path

import numpy as np

from .errors import FileFormatError

MAGIC_ATTENTION = b"ATTN"
MAGIC_EMBEDDING = b"EMBD"
MAGIC_WEIGHTS = b"WGHT"

FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIII8x")
HEADER_SIZE = _HEADER.size  # 32 bytes


def write_tensor(path: str | os.PathLike, magic: bytes, dims: tuple[int, ...], values: np.ndarray) -> None:
    """Write a float64 tensor under the given magic and dimensions."""
    if len(magic) != 4:
        raise ValueError("magic must be exactly 4 bytes")
    dims4 = tuple(dims) + (1,) * (4 - len(dims))
    if len(dims4) != 4 or any(d < 1 for d in dims4):
        raise ValueError(f"need 1..4 positive dimensions, got {dims}")
    flat = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
    if flat.size != prod(dims4):
        raise ValueError(f"{flat.size} values do not fill dims {dims4}")
    header = _HEADER.pack(magic, FORMAT_VERSION, *dims4)
    Path(path).write_bytes(header + flat.astype("<f8").tobytes())


def read_tensor(path: str | os.PathLike, expected_magic: bytes) -> tuple[tuple[int, int, int, int], np.ndarray]:
    """Read a tensor container, checking magic and size consistency."""
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE:
        raise FileFormatError(f"{path}: shorter than the 32-byte header")
    magic, version, d0, d1, d2, d3 = _HEADER.unpack_from(data)
    if magic != expected_magic:
        raise FileFormatError(
            f"{path}: magic {magic!r} does not match expected {expected_magic!r}"
        )
    if version != FORMAT_VERSION:
        raise FileFormatError(f"{path}: unsupported container version {version}")
    dims = (d0, d1, d2, d3)
    if any(d < 1 for d in dims):
        raise FileFormatError(f"{path}: zero dimension in header {dims}")
    expected_bytes = prod(dims) * 8
    payload = data[HEADER_SIZE:]
    if len(payload) != expected_bytes:
        raise FileFormatError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected_bytes}"
        )
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
    return dims, values


def write_attention_json(path: str | os.PathLike, scores: np.ndarray) -> None:
    """JSON form for small test tensors; same (l, h, w, i) index order."""
    arr = np.ascontiguousarray(scores, dtype=np.float64)
    if arr.ndim != 4:
        raise ValueError("attention scores must be 4-D (layers, heads, text, visual)")
    doc = {
        "layers": arr.shape[0],
        "heads": arr.shape[1],
        "text_tokens": arr.shape[2],
        "visual_tokens": arr.shape[3],
        "scores": arr.reshape(-1).tolist(),
    }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def read_attention_json(path: str | os.PathLike) -> np.ndarray:
    """Read the JSON attention form back into a 4-D array."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: invalid JSON ({exc})") from exc
    try:
        dims = (
            int(doc["layers"]),
            int(doc["heads"]),
            int(doc["text_tokens"]),
            int(doc["visual_tokens"]),
        )
        flat = np.asarray(doc["scores"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"{path}: malformed attention JSON ({exc})") from exc
    if any(d < 1 for d in dims):
        raise FileFormatError(f"{path}: zero dimension {dims}")
    if flat.size != prod(dims):
        raise FileFormatError(
            f"{path}: {flat.size} scores do not fill dims {dims}"
        )
    return flat.reshape(dims)


def read_attention_file(path: str | os.PathLike) -> np.ndarray:
    """Read attention scores from either the binary container or JSON form."""
    if Path(path).suffix.lower() == ".json":
        return read_attention_json(path)
    _, values = read_tensor(path, MAGIC_ATTENTION)
    return values

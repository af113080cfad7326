"""Deterministic synthetic scenes: frames, embeddings, attention tensors.

Scenes are built from an explicit SplitMix64 stream rather than a library
RNG so regenerated bytes stay identical across interpreter and numpy
versions. A scene has a flat background, one textured square moving on a
bouncing path (attention concentrates on it), and an optional static
textured distractor that is visually rich but attention-irrelevant.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidSpec
from .frames import Frame
from .imageio import load_frame_sequence, write_pgm
from .kv import ProjectionWeights, TokenEmbedding
from .entropy import AttentionTensor
from .tensorio import (
    MAGIC_ATTENTION,
    MAGIC_EMBEDDING,
    MAGIC_WEIGHTS,
    read_tensor,
    write_tensor,
)

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Tiny fixed-recipe PRNG; the stream is pinned forever."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_int(self, low: int, high: int) -> int:
        """Uniform integer in [low, high] via rejection-free modulo.

        The tiny modulo bias is irrelevant for texture synthesis and keeps
        the stream layout simple.
        """
        if high < low:
            raise ValueError("empty range")
        return low + self.next_u64() % (high - low + 1)

    def next_unit(self) -> float:
        """Dyadic rational in [0, 1); exactly representable, hence portable."""
        return (self.next_u64() >> 11) / float(1 << 53)

    def next_signed_unit(self) -> float:
        """Dyadic rational in [-1, 1)."""
        return 2.0 * self.next_unit() - 1.0


@dataclass(frozen=True)
class SceneSpec:
    """Geometry, motion, and tensor dimensions of a synthetic scene."""

    width: int = 224
    height: int = 224
    steps: int = 100
    grid_rows: int = 16
    grid_cols: int = 16
    background_level: int = 96
    object_size: int = 56
    object_start: tuple[int, int] = (14, 42)
    object_speed: tuple[int, int] = (14, 28)
    object_level_low: int = 128
    object_level_high: int = 255
    distractor_size: int = 42
    distractor_pos: tuple[int, int] = (154, 14)
    distractor_level_low: int = 0
    distractor_level_high: int = 255
    noise_level: int = 0
    text_tokens: int = 8
    layers: int = 2
    heads: int = 2
    task_token: int = 2
    attention_boost: float = 9.0
    d_model: int = 16
    d_k: int = 8
    d_v: int = 8

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.steps <= 0:
            raise InvalidSpec("scene dimensions and steps must be positive")
        if self.grid_rows <= 0 or self.grid_cols <= 0:
            raise InvalidSpec("grid must be positive")
        if self.width % self.grid_cols or self.height % self.grid_rows:
            raise InvalidSpec("grid must divide the frame dimensions")
        if not 0 <= self.background_level <= 255:
            raise InvalidSpec("background level outside [0, 255]")
        if self.object_size <= 0 or self.object_size > min(self.width, self.height):
            raise InvalidSpec("object does not fit the frame")
        ox, oy = self.object_start
        if not (0 <= ox <= self.width - self.object_size):
            raise InvalidSpec("object start x out of range")
        if not (0 <= oy <= self.height - self.object_size):
            raise InvalidSpec("object start y out of range")
        if self.distractor_size < 0:
            raise InvalidSpec("distractor size must be nonnegative")
        if self.distractor_size:
            dx, dy = self.distractor_pos
            if not (0 <= dx <= self.width - self.distractor_size):
                raise InvalidSpec("distractor x out of range")
            if not (0 <= dy <= self.height - self.distractor_size):
                raise InvalidSpec("distractor y out of range")
        for low, high in (
            (self.object_level_low, self.object_level_high),
            (self.distractor_level_low, self.distractor_level_high),
        ):
            if not 0 <= low <= high <= 255:
                raise InvalidSpec("texture level range outside [0, 255]")
        if self.noise_level < 0 or self.noise_level > 255:
            raise InvalidSpec("noise level outside [0, 255]")
        if self.text_tokens < 1 or self.layers < 1 or self.heads < 1:
            raise InvalidSpec("tensor dimensions must be at least 1")
        if not 0 <= self.task_token < self.text_tokens:
            raise InvalidSpec("task token index out of range")
        if self.attention_boost < 1.0:
            raise InvalidSpec("attention boost must be at least 1")
        if self.d_model < 1 or self.d_k < 1 or self.d_v < 1:
            raise InvalidSpec("projection dimensions must be at least 1")


def bundled_scene_spec() -> SceneSpec:
    """The moving-square demo scene used by default `run` invocations.

    Start and speed are multiples of the 14-pixel patch size, so any patch
    is either bitwise-unchanged between frames or substantially rewritten;
    the reuse set then never holds a partially-changed patch.
    """
    return SceneSpec()


BUNDLED_SCENE_SEED = 2024


@dataclass(frozen=True)
class Scene:
    """An in-memory scene: everything one rollout consumes."""

    spec: SceneSpec
    seed: int
    frames: list[Frame]
    embeddings: list[TokenEmbedding]
    attention: list[AttentionTensor]
    weights: ProjectionWeights


def _object_position(spec: SceneSpec, t: int) -> tuple[int, int]:
    """Bouncing path: a triangle wave in each axis, exact integers."""
    pos = []
    for start, speed, limit in (
        (spec.object_start[0], spec.object_speed[0], spec.width - spec.object_size),
        (spec.object_start[1], spec.object_speed[1], spec.height - spec.object_size),
    ):
        if limit == 0:
            pos.append(0)
            continue
        period = 2 * limit
        m = (start + speed * t) % period
        pos.append(m if m <= limit else period - m)
    return pos[0], pos[1]


def _patch_pixel_count(spec: SceneSpec) -> int:
    return (spec.height // spec.grid_rows) * (spec.width // spec.grid_cols)


def synth_scene(seed: int, spec: SceneSpec) -> Scene:
    """Generate a scene deterministically from (seed, spec).

    Stream consumption order is fixed: object texture, distractor texture,
    background noise, embedding projection, attention projections.
    """
    rng = SplitMix64(seed)
    n_rows, n_cols = spec.grid_rows, spec.grid_cols
    num_tokens = n_rows * n_cols
    patch_h = spec.height // n_rows
    patch_w = spec.width // n_cols

    size = spec.object_size
    object_texture = np.array(
        [
            [rng.next_int(spec.object_level_low, spec.object_level_high) for _ in range(size)]
            for _ in range(size)
        ],
        dtype=np.uint8,
    )
    background = np.full((spec.height, spec.width), spec.background_level, dtype=np.uint8)
    if spec.distractor_size:
        d = spec.distractor_size
        distractor = np.array(
            [
                [rng.next_int(spec.distractor_level_low, spec.distractor_level_high) for _ in range(d)]
                for _ in range(d)
            ],
            dtype=np.uint8,
        )
        dx, dy = spec.distractor_pos
        background[dy : dy + d, dx : dx + d] = distractor
    if spec.noise_level:
        # Noise is frozen into the background once, so it never breaks
        # frame-to-frame staticness.
        noise = np.array(
            [
                [rng.next_int(0, spec.noise_level) for _ in range(spec.width)]
                for _ in range(spec.height)
            ],
            dtype=np.int64,
        )
        background = np.clip(background.astype(np.int64) + noise, 0, 255).astype(np.uint8)

    frames = []
    object_token_sets = []
    for t in range(spec.steps):
        pixels = background.copy()
        ox, oy = _object_position(spec, t)
        pixels[oy : oy + size, ox : ox + size] = object_texture
        frames.append(Frame(pixels=pixels, frame_index=t))
        covered = set()
        for row in range(oy // patch_h, (oy + size - 1) // patch_h + 1):
            for col in range(ox // patch_w, (ox + size - 1) // patch_w + 1):
                covered.add(row * n_cols + col)
        object_token_sets.append(covered)

    patch_pixels = _patch_pixel_count(spec)
    projection = np.array(
        [
            [rng.next_signed_unit() for _ in range(patch_pixels)]
            for _ in range(spec.d_model)
        ],
        dtype=np.float64,
    )

    embeddings = []
    for frame in frames:
        x = np.empty((num_tokens, spec.d_model), dtype=np.float64)
        for token in range(num_tokens):
            row = token // n_cols
            col = token % n_cols
            patch = frame.pixels[
                row * patch_h : (row + 1) * patch_h,
                col * patch_w : (col + 1) * patch_w,
            ]
            scaled = patch.astype(np.float64).ravel() / 255.0
            x[token] = projection @ scaled
        embeddings.append(TokenEmbedding(x=x))

    attention = []
    for t in range(spec.steps):
        scores = np.empty(
            (spec.layers, spec.heads, spec.text_tokens, num_tokens), dtype=np.float64
        )
        covered = object_token_sets[t]
        for layer in range(spec.layers):
            for head in range(spec.heads):
                boost = spec.attention_boost + layer + head
                for w in range(spec.text_tokens):
                    row = np.ones(num_tokens, dtype=np.float64)
                    if w == spec.task_token:
                        for token in covered:
                            row[token] = boost
                    scores[layer, head, w] = row / row.sum()
        attention.append(AttentionTensor(scores=scores))

    def matrix(rows: int, cols: int) -> np.ndarray:
        return np.array(
            [[rng.next_signed_unit() for _ in range(cols)] for _ in range(rows)],
            dtype=np.float64,
        )

    weights = ProjectionWeights(
        w_k=matrix(spec.d_model, spec.d_k),
        w_v=matrix(spec.d_model, spec.d_v),
        w_q=matrix(spec.d_model, spec.d_k),
    )
    return Scene(
        spec=spec,
        seed=seed,
        frames=frames,
        embeddings=embeddings,
        attention=attention,
        weights=weights,
    )


def write_scene(scene: Scene, out_dir: str | Path) -> Path:
    """Write a scene to the on-disk layout `run --scene` consumes."""
    out = Path(out_dir)
    for sub in ("frames", "attn", "embed", "weights"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(scene.frames):
        write_pgm(frame, out / "frames" / f"frame_{t:04d}.pgm")
    for t, tensor in enumerate(scene.attention):
        write_tensor(
            out / "attn" / f"attn_{t:04d}.bin",
            MAGIC_ATTENTION,
            tensor.scores.shape,
            tensor.scores,
        )
    for t, embedding in enumerate(scene.embeddings):
        write_tensor(
            out / "embed" / f"embed_{t:04d}.bin",
            MAGIC_EMBEDDING,
            embedding.x.shape,
            embedding.x,
        )
    for name, mat in (
        ("wk", scene.weights.w_k),
        ("wv", scene.weights.w_v),
        ("wq", scene.weights.w_q),
    ):
        write_tensor(out / "weights" / f"{name}.bin", MAGIC_WEIGHTS, mat.shape, mat)
    manifest = {"seed": scene.seed, "spec": asdict(scene.spec)}
    (out / "scene.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out


def load_scene(scene_dir: str | Path) -> Scene:
    """Load a scene directory written by :func:`write_scene`."""
    root = Path(scene_dir)
    manifest_path = root / "scene.json"
    if not manifest_path.is_file():
        raise InvalidSpec(f"{root}: missing scene.json")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    spec_fields = dict(manifest["spec"])
    for key in ("object_start", "object_speed", "distractor_pos"):
        spec_fields[key] = tuple(spec_fields[key])
    spec = SceneSpec(**spec_fields)
    frames = load_frame_sequence(root / "frames")
    attention = []
    for path in sorted((root / "attn").glob("*.bin")):
        _, values = read_tensor(path, MAGIC_ATTENTION)
        attention.append(AttentionTensor(scores=values))
    embeddings = []
    for path in sorted((root / "embed").glob("*.bin")):
        dims, values = read_tensor(path, MAGIC_EMBEDDING)
        embeddings.append(TokenEmbedding(x=values.reshape(dims[0], dims[1])))
    mats = {}
    for name in ("wk", "wv", "wq"):
        dims, values = read_tensor(root / "weights" / f"{name}.bin", MAGIC_WEIGHTS)
        mats[name] = values.reshape(dims[0], dims[1])
    weights = ProjectionWeights(w_k=mats["wk"], w_v=mats["wv"], w_q=mats["wq"])
    if not (len(frames) == len(attention) == len(embeddings)):
        raise InvalidSpec(
            f"{root}: {len(frames)} frames, {len(attention)} attention tensors, "
            f"{len(embeddings)} embedding files — counts must match"
        )
    return Scene(
        spec=spec,
        seed=int(manifest["seed"]),
        frames=frames,
        embeddings=embeddings,
        attention=attention,
        weights=weights,
    )

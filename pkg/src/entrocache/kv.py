"""A single attention layer with a per-token KV cache.

The cache update rule copies cached key/value rows for tokens in the
reuse set and recomputes projections for everything else. Projections
run row by row so each token's result depends only on its own embedding;
that makes "reused row equals recomputed row" a bitwise statement
whenever the underlying embedding did not change.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ColdCacheReuse, DimensionMismatch


class Provenance(enum.IntEnum):
    RECOMPUTED = 0
    REUSED = 1


def _require_finite_2d(name: str, arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got {arr.ndim}-D")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} must hold finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ProjectionWeights:
    """Key/value/query projection matrices sharing the model width."""

    w_k: np.ndarray
    w_v: np.ndarray
    w_q: np.ndarray

    def __post_init__(self):
        w_k = _require_finite_2d("w_k", self.w_k)
        w_v = _require_finite_2d("w_v", self.w_v)
        w_q = _require_finite_2d("w_q", self.w_q)
        if not (w_k.shape[0] == w_v.shape[0] == w_q.shape[0]):
            raise DimensionMismatch("projection matrices disagree on d_model")
        if w_q.shape[1] != w_k.shape[1]:
            raise DimensionMismatch("w_q and w_k disagree on d_k")
        object.__setattr__(self, "w_k", w_k)
        object.__setattr__(self, "w_v", w_v)
        object.__setattr__(self, "w_q", w_q)

    @property
    def d_model(self) -> int:
        return self.w_k.shape[0]

    @property
    def d_k(self) -> int:
        return self.w_k.shape[1]

    @property
    def d_v(self) -> int:
        return self.w_v.shape[1]


@dataclass(frozen=True)
class TokenEmbedding:
    """Per-token feature rows for one timestep; shape (tokens, d_model)."""

    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _require_finite_2d("x", self.x))

    @property
    def num_tokens(self) -> int:
        return self.x.shape[0]

    @property
    def d_model(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class KVCacheState:
    """Cached key/value rows with per-token provenance flags.

    A reused row is bitwise-identical to the previous step's row. step is
    the timestep of the last update; -1 marks a cold cache.
    """

    keys: np.ndarray
    values: np.ndarray
    provenance: np.ndarray
    step: int

    def __post_init__(self):
        keys = _require_finite_2d("keys", self.keys)
        values = _require_finite_2d("values", self.values)
        provenance = np.ascontiguousarray(self.provenance, dtype=np.uint8)
        if keys.shape[0] != values.shape[0] or keys.shape[0] != provenance.shape[0]:
            raise DimensionMismatch("cache rows disagree on token count")
        provenance.setflags(write=False)
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "provenance", provenance)

    @classmethod
    def cold(cls, num_tokens: int, d_k: int, d_v: int) -> "KVCacheState":
        return cls(
            keys=np.zeros((num_tokens, d_k)),
            values=np.zeros((num_tokens, d_v)),
            provenance=np.zeros(num_tokens, dtype=np.uint8),
            step=-1,
        )

    @property
    def is_cold(self) -> bool:
        return self.step < 0

    @property
    def num_tokens(self) -> int:
        return self.keys.shape[0]


def project_tokens(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Project each token row through a weight matrix, one row at a time.

    Row-wise products pin the accumulation order per row, so a row's
    result is a pure function of that row and the weights — other rows
    cannot perturb it. Full-matrix BLAS calls do not guarantee that.
    """
    if x.shape[1] != weight.shape[0]:
        raise DimensionMismatch(
            f"embedding width {x.shape[1]} does not match weight rows {weight.shape[0]}"
        )
    out = np.empty((x.shape[0], weight.shape[1]), dtype=np.float64)
    for i in range(x.shape[0]):
        out[i] = x[i] @ weight
    return out


def _validate_reuse_set(reuse_set: Iterable[int], num_tokens: int) -> set[int]:
    reuse = {int(i) for i in reuse_set}
    if reuse and (min(reuse) < 0 or max(reuse) >= num_tokens):
        raise DimensionMismatch(
            f"reuse indices outside the {num_tokens}-token range"
        )
    return reuse


def kv_step(
    cache: KVCacheState,
    x_t: TokenEmbedding,
    reuse_set: Iterable[int],
    weights: ProjectionWeights,
) -> KVCacheState:
    """Advance the cache one step: copy reused rows, recompute the rest."""
    if x_t.d_model != weights.d_model:
        raise DimensionMismatch(
            f"embedding width {x_t.d_model} does not match weights d_model "
            f"{weights.d_model}"
        )
    reuse = _validate_reuse_set(reuse_set, x_t.num_tokens)
    if cache.is_cold:
        if reuse:
            raise ColdCacheReuse("cannot reuse rows from an empty cache")
    else:
        if cache.num_tokens != x_t.num_tokens:
            raise DimensionMismatch(
                f"cache holds {cache.num_tokens} tokens, embeddings {x_t.num_tokens}"
            )
        if cache.keys.shape[1] != weights.d_k or cache.values.shape[1] != weights.d_v:
            raise DimensionMismatch("cache row widths disagree with the weights")

    keys = project_tokens(x_t.x, weights.w_k)
    values = project_tokens(x_t.x, weights.w_v)
    provenance = np.full(x_t.num_tokens, Provenance.RECOMPUTED, dtype=np.uint8)
    for i in sorted(reuse):
        keys[i] = cache.keys[i]
        values[i] = cache.values[i]
        provenance[i] = Provenance.REUSED
    return KVCacheState(
        keys=keys, values=values, provenance=provenance, step=cache.step + 1
    )


def attention_forward(
    x_t: TokenEmbedding, cache: KVCacheState, weights: ProjectionWeights
) -> np.ndarray:
    """Scaled dot-product attention of fresh queries against cached K/V."""
    if cache.is_cold:
        raise ColdCacheReuse("attention needs a populated cache; run kv_step first")
    if cache.num_tokens != x_t.num_tokens:
        raise DimensionMismatch(
            f"cache holds {cache.num_tokens} tokens, embeddings {x_t.num_tokens}"
        )
    if cache.keys.shape[1] != weights.d_k or cache.values.shape[1] != weights.d_v:
        raise DimensionMismatch("cache row widths disagree with the weights")
    q = project_tokens(x_t.x, weights.w_q)
    logits = (q @ cache.keys.T) / math.sqrt(weights.d_k)
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    return probs @ cache.values


def output_drift(full: np.ndarray, cached: np.ndarray) -> tuple[float, float]:
    """(max absolute, root-mean-square) difference between two outputs."""
    full = np.asarray(full, dtype=np.float64)
    cached = np.asarray(cached, dtype=np.float64)
    if full.shape != cached.shape:
        raise DimensionMismatch(
            f"output shapes {full.shape} and {cached.shape} differ"
        )
    diff = full - cached
    max_abs = float(np.max(np.abs(diff)))
    rms = float(math.sqrt(np.mean(diff * diff)))
    return max_abs, rms

"""Per-token information scores.

Two normalized scores in [0, 1] are attached to every visual token:

* visual score: Shannon entropy of the patch's gray-level histogram,
  divided by the maximum log2(G) — high for texture-rich patches;
* attention score: one minus the normalized entropy of the token's
  softmax distribution of layer/head-averaged cross-attention over the
  text tokens — high when attention concentrates on few text tokens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyHistogram, NotADistribution
from .frames import Frame, GrayHistogram, PatchGrid, patch_histogram

_DISTRIBUTION_TOL = 1e-9


@dataclass(frozen=True)
class AttentionTensor:
    """Cross-attention scores indexed (layer, head, text token, visual token).

    Each (layer, head, text) row is expected to be softmax output already,
    so entries are nonnegative; row sums are not revalidated here.
    """

    scores: np.ndarray

    def __post_init__(self):
        scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        if scores.ndim != 4:
            raise DimensionMismatch(
                f"attention scores must be 4-D, got {scores.ndim}-D"
            )
        if any(d < 1 for d in scores.shape):
            raise DimensionMismatch(f"empty attention dimension in {scores.shape}")
        if not np.isfinite(scores).all():
            raise ValueError("attention scores must be finite")
        if scores.min() < 0:
            raise ValueError("attention scores must be nonnegative")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    @classmethod
    def from_flat(
        cls, layers: int, heads: int, text_tokens: int, visual_tokens: int, flat
    ) -> "AttentionTensor":
        values = np.asarray(flat, dtype=np.float64).reshape(-1)
        expected = layers * heads * text_tokens * visual_tokens
        if values.size != expected:
            raise DimensionMismatch(
                f"{values.size} scores do not fill "
                f"{layers}x{heads}x{text_tokens}x{visual_tokens}"
            )
        return cls(values.reshape(layers, heads, text_tokens, visual_tokens))

    @property
    def num_layers(self) -> int:
        return self.scores.shape[0]

    @property
    def num_heads(self) -> int:
        return self.scores.shape[1]

    @property
    def num_text_tokens(self) -> int:
        return self.scores.shape[2]

    @property
    def num_visual_tokens(self) -> int:
        return self.scores.shape[3]


@dataclass(frozen=True)
class EntropyScores:
    """Normalized per-token scores; both vectors have one entry per token."""

    visual: np.ndarray
    attention_info: np.ndarray

    def __post_init__(self):
        visual = np.ascontiguousarray(self.visual, dtype=np.float64)
        attention = np.ascontiguousarray(self.attention_info, dtype=np.float64)
        if visual.ndim != 1 or attention.ndim != 1:
            raise DimensionMismatch("score vectors must be 1-D")
        if visual.shape != attention.shape:
            raise DimensionMismatch(
                f"visual has {visual.size} entries, attention {attention.size}"
            )
        visual.setflags(write=False)
        attention.setflags(write=False)
        object.__setattr__(self, "visual", visual)
        object.__setattr__(self, "attention_info", attention)

    @property
    def num_tokens(self) -> int:
        return int(self.visual.size)


def visual_entropy(hist: GrayHistogram) -> float:
    """Shannon entropy in bits of a patch histogram.

    Zero-count levels contribute nothing (0 log 0 = 0 limit convention).
    Accumulation is left-to-right over ascending gray level so the result
    is reproducible bit-for-bit.
    """
    if hist.total == 0:
        raise EmptyHistogram("cannot score an empty histogram")
    total = hist.total
    entropy = 0.0
    for count in hist.counts.tolist():
        if count:
            p = count / total
            entropy -= p * math.log2(p)
    return entropy


def normalize_visual_entropy(entropy_bits: float, g_levels: int) -> float:
    """Scale entropy by its maximum log2(G) onto [0, 1]."""
    if g_levels < 2:
        raise ValueError("g_levels must be at least 2")
    return entropy_bits / math.log2(g_levels)


def mean_attention(attention: AttentionTensor) -> np.ndarray:
    """Average scores over layers and heads; result is (text, visual)."""
    return attention.scores.mean(axis=(0, 1))


def attention_distribution(mean_scores: np.ndarray, token: int) -> np.ndarray:
    """Softmax over text tokens of one visual token's averaged column.

    Uses max-subtraction for numerical stability; the output sums to 1
    within 1e-9.
    """
    column = mean_scores[:, token]
    shifted = column - column.max()
    weights = np.exp(shifted)
    return weights / weights.sum()


def attention_entropy(q: np.ndarray) -> float:
    """Shannon entropy in bits of a probability vector over text tokens."""
    q = np.asarray(q, dtype=np.float64)
    if q.min() < 0:
        raise NotADistribution("negative probability entry")
    total = float(q.sum())
    if abs(total - 1.0) > _DISTRIBUTION_TOL:
        raise NotADistribution(f"probabilities sum to {total!r}, not 1")
    entropy = 0.0
    for p in q.tolist():
        if p > 0:
            entropy -= p * math.log2(p)
    return entropy


def attention_information(entropy_bits: float, num_text_tokens: int) -> float:
    """Concentration score: entropy reduction against a uniform prior.

    A single text token makes the distribution trivially one-hot, so the
    degenerate denominator log2(1) = 0 is defined to score 1.0.
    """
    if num_text_tokens < 1:
        raise ValueError("need at least one text token")
    if num_text_tokens == 1:
        return 1.0
    return 1.0 - entropy_bits / math.log2(num_text_tokens)


def score_frame(
    frame: Frame,
    grid: PatchGrid,
    attention: AttentionTensor,
    g_levels: int = 256,
) -> EntropyScores:
    """Score every token of a frame with both normalized measures."""
    if grid.num_tokens != attention.num_visual_tokens:
        raise DimensionMismatch(
            f"grid has {grid.num_tokens} tokens, attention tensor "
            f"{attention.num_visual_tokens}"
        )
    averaged = mean_attention(attention)
    num_text = attention.num_text_tokens
    visual = np.empty(grid.num_tokens, dtype=np.float64)
    info = np.empty(grid.num_tokens, dtype=np.float64)
    for token in range(grid.num_tokens):
        hist = patch_histogram(frame, grid, token, g_levels)
        visual[token] = normalize_visual_entropy(visual_entropy(hist), g_levels)
        q = attention_distribution(averaged, token)
        info[token] = attention_information(attention_entropy(q), num_text)
    return EntropyScores(visual=visual, attention_info=info)

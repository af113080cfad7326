"""Timestep-scheduled token selection and reuse-set algebra."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DimensionMismatch
from .frames import Frame, PatchGrid
from .entropy import EntropyScores


@dataclass(frozen=True)
class ScheduleParams:
    """Budget endpoints k1 <= k2 and the transition horizon in steps."""

    k1: int = 40
    k2: int = 60
    total_steps: int = 100

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be nonnegative")
        if self.k2 < self.k1:
            raise ValueError("k2 must be at least k1")
        if self.total_steps < 1:
            raise ValueError("total_steps must be at least 1")


def schedule_at_alpha(alpha: Fraction, params: ScheduleParams) -> tuple[int, int]:
    """Budgets (k_vis, k_attn) at an exact transition fraction alpha.

    Exact rational arithmetic keeps the two floors consistent: their sum
    is k1 + k2 exactly whenever (k2 - k1) * alpha is an integer, and
    k1 + k2 - 1 otherwise. Float evaluation of the same formulas can land
    on the wrong side of a floor boundary.
    """
    spread = params.k2 - params.k1
    k_vis = math.floor(params.k2 - spread * alpha)
    k_attn = math.floor(params.k1 + spread * alpha)
    return k_vis, k_attn


def schedule(t: int, params: ScheduleParams) -> tuple[int, int]:
    """Budgets at timestep t; the fraction t / total_steps saturates at 1."""
    clamped = min(max(int(t), 0), params.total_steps)
    return schedule_at_alpha(Fraction(clamped, params.total_steps), params)


def top_k(scores: np.ndarray, k: int) -> set[int]:
    """Indices of the k largest scores.

    Total order: score descending, then index ascending, so ties resolve
    to the lower index and the output is deterministic. k beyond the
    vector length returns all indices.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1:
        raise DimensionMismatch("scores must be a 1-D vector")
    if k == 0:
        return set()
    order = np.argsort(-scores, kind="stable")
    return {int(i) for i in order[: min(k, scores.size)]}


def select_important(
    scores: EntropyScores, t: int, params: ScheduleParams
) -> set[int]:
    """Union of the visual top-k and attention top-k at timestep t."""
    k_vis, k_attn = schedule(t, params)
    return top_k(scores.visual, k_vis) | top_k(scores.attention_info, k_attn)


def patch_cosine(
    frame_t: Frame, frame_prev: Frame, grid: PatchGrid, token: int
) -> float:
    """Cosine similarity of a token's pixel vectors across two frames.

    Dot products are exact integers, so parallel patches (identical or
    scaled) return exactly 1.0 and orthogonal ones exactly 0.0. Two zero
    vectors compare as 1.0; exactly one zero vector as 0.0.
    """
    if frame_t.pixels.shape != frame_prev.pixels.shape:
        raise DimensionMismatch(
            f"frames {frame_prev.pixels.shape} and {frame_t.pixels.shape} differ"
        )
    u = grid.patch_view(frame_t, token).astype(np.int64).ravel()
    v = grid.patch_view(frame_prev, token).astype(np.int64).ravel()
    dot_uv = int(np.dot(u, v))
    dot_uu = int(np.dot(u, u))
    dot_vv = int(np.dot(v, v))
    if dot_uu == 0 and dot_vv == 0:
        return 1.0
    if dot_uu == 0 or dot_vv == 0:
        return 0.0
    if dot_uv * dot_uv == dot_uu * dot_vv:
        return 1.0 if dot_uv > 0 else -1.0
    cos = dot_uv / math.sqrt(dot_uu * dot_vv)
    return min(1.0, max(-1.0, cos))


def detect_static(
    frame_t: Frame,
    frame_prev: Frame | None,
    grid: PatchGrid,
    tau: float,
) -> set[int]:
    """Tokens whose patch barely changed: cosine similarity >= tau.

    The first frame of a rollout has no predecessor and yields the empty
    set, so every token is computed on a cold start.
    """
    if not -1.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [-1, 1]")
    if frame_prev is None:
        return set()
    return {
        token
        for token in range(grid.num_tokens)
        if patch_cosine(frame_t, frame_prev, grid, token) >= tau
    }


@dataclass(frozen=True)
class TokenSets:
    """Static, important, and reuse index sets for one timestep.

    Invariant: reuse = static minus important, hence reuse and important
    are disjoint.
    """

    static_set: frozenset[int]
    important_set: frozenset[int]
    reuse_set: frozenset[int]
    t: int

    def __post_init__(self):
        if self.reuse_set != self.static_set - self.important_set:
            raise ValueError("reuse set must equal static minus important")
        if self.t < 0:
            raise ValueError("timestep must be nonnegative")


def build_token_sets(
    static_set: set[int], important_set: set[int], t: int
) -> TokenSets:
    """Record the three sets at timestep t; reuse = static \\ important."""
    static = frozenset(static_set)
    important = frozenset(important_set)
    return TokenSets(
        static_set=static,
        important_set=important,
        reuse_set=static - important,
        t=t,
    )


def token_sets_to_dict(sets: TokenSets, k_vis: int, k_attn: int) -> dict:
    """JSON-ready form: sorted index arrays plus the step's budgets."""
    return {
        "t": sets.t,
        "static": sorted(sets.static_set),
        "important": sorted(sets.important_set),
        "reuse": sorted(sets.reuse_set),
        "k_vis": k_vis,
        "k_attn": k_attn,
    }

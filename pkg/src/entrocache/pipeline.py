"""Pipeline driver: per-step scoring, selection, cache reuse, reporting."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .config import RunConfig
from .errors import DimensionMismatch, EntroCacheError, InputError
from .frames import PatchGrid, partition
from .entropy import score_frame
from .kv import KVCacheState, attention_forward, kv_step, output_drift
from .metrics import CostModel, RunReport, StepTrace, build_report
from .overlay import render_overlay, save_overlay
from .selection import (
    ScheduleParams,
    build_token_sets,
    detect_static,
    schedule,
    schedule_at_alpha,
    token_sets_to_dict,
    top_k,
)
from .synth import BUNDLED_SCENE_SEED, Scene, bundled_scene_spec, load_scene, synth_scene

# The static-combination ablation fixes the transition fraction midway.
STATIC_MODE_ALPHA = Fraction(1, 2)


def mode_budgets(mode: str, t: int, params: ScheduleParams) -> tuple[int, int]:
    """Per-mode (k_vis, k_attn) budgets at timestep t.

    dynamic follows the timestep schedule; static pins the transition
    fraction at 1/2; visual and attention give the whole k1+k2 budget to
    one score.
    """
    if mode == "dynamic":
        return schedule(t, params)
    if mode == "static":
        return schedule_at_alpha(STATIC_MODE_ALPHA, params)
    total = params.k1 + params.k2
    if mode == "visual":
        return total, 0
    if mode == "attention":
        return 0, total
    raise InputError(f"unknown selection mode {mode!r}")


@dataclass(frozen=True)
class PipelineResult:
    """A finished run: the report plus the per-step set trace.

    kv_forward_seconds is wall-clock time spent in the cached attention
    forward pass. It is hardware-dependent and non-normative, so it is
    deliberately absent from every serialized artifact.
    """

    config: RunConfig
    report: RunReport
    set_trace: list[dict]
    kv_forward_seconds: float = 0.0

    def trace_dict(self) -> dict:
        return {"sets": self.set_trace, "report": self.report.to_dict()}

    def trace_json(self) -> str:
        """Canonical serialization used for trace comparisons."""
        return json.dumps(self.trace_dict(), indent=2, sort_keys=True) + "\n"

    def report_json(self) -> str:
        doc = {"config": self.config.to_dict(), "report": self.report.to_dict()}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def resolve_scene(config: RunConfig) -> Scene:
    """The configured scene directory, or the bundled scene synthesized
    from the configured seed when no directory is given."""
    if config.scene_dir:
        return load_scene(config.scene_dir)
    return synth_scene(config.seed, bundled_scene_spec())


def run_pipeline(config: RunConfig, scene: Scene | None = None) -> PipelineResult:
    """Run the full per-step loop over a scene.

    Each step scores the frame, selects important tokens under the
    schedule, detects static tokens against the previous frame, forms the
    reuse set, advances the KV cache, and measures output drift against a
    cache that recomputes everything.
    """
    if scene is None:
        scene = resolve_scene(config)
    if not scene.frames:
        raise InputError("scene provides no frames")

    steps = len(scene.frames)
    if config.max_frames:
        steps = min(steps, config.max_frames)
    if len(scene.attention) < steps or len(scene.embeddings) < steps:
        raise InputError(
            f"scene provides {len(scene.attention)} attention tensors and "
            f"{len(scene.embeddings)} embedding sets for {steps} steps"
        )

    first = scene.frames[0]
    grid = partition(first, config.grid_rows, config.grid_cols)
    if config.k2 > grid.num_tokens:
        raise InputError(
            f"k2={config.k2} exceeds the grid's {grid.num_tokens} tokens"
        )
    for tensor in scene.attention[:steps]:
        if tensor.num_visual_tokens != grid.num_tokens:
            raise DimensionMismatch(
                f"attention tensor covers {tensor.num_visual_tokens} tokens, "
                f"grid has {grid.num_tokens}"
            )
    params = ScheduleParams(k1=config.k1, k2=config.k2, total_steps=config.total_steps)
    cost = CostModel(
        flops_per_token=config.flops_per_token, fixed_flops=config.fixed_flops
    )

    reuse_cache = KVCacheState.cold(grid.num_tokens, scene.weights.d_k, scene.weights.d_v)
    full_cache = KVCacheState.cold(grid.num_tokens, scene.weights.d_k, scene.weights.d_v)

    out_dir = Path(config.out_dir) if config.out_dir else None
    overlay_dir = None
    if out_dir is not None and config.write_overlays:
        overlay_dir = out_dir / "overlays"
        overlay_dir.mkdir(parents=True, exist_ok=True)

    trace: list[StepTrace] = []
    set_trace: list[dict] = []
    forward_seconds = 0.0
    for t in range(steps):
        try:
            reuse_cache, full_cache, elapsed = _run_step(
                t,
                scene,
                grid,
                config,
                params,
                reuse_cache,
                full_cache,
                trace,
                set_trace,
                overlay_dir,
            )
        except EntroCacheError as exc:
            # same error class, annotated with the failing step
            raise type(exc)(f"step {t}: {exc}") from exc
        forward_seconds += elapsed

    report = build_report(trace, cost)
    result = PipelineResult(
        config=config,
        report=report,
        set_trace=set_trace,
        kv_forward_seconds=forward_seconds,
    )

    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(result.report_json(), encoding="utf-8")
        (out_dir / "report.csv").write_text(report.to_csv(), encoding="utf-8")
        (out_dir / "trace.json").write_text(result.trace_json(), encoding="utf-8")
    return result


def _run_step(
    t: int,
    scene: Scene,
    grid: PatchGrid,
    config: RunConfig,
    params: ScheduleParams,
    reuse_cache: KVCacheState,
    full_cache: KVCacheState,
    trace: list[StepTrace],
    set_trace: list[dict],
    overlay_dir: Path | None,
) -> tuple[KVCacheState, KVCacheState, float]:
    frame = scene.frames[t]
    if config.attn_source == "same-frame":
        attn_index = t
    else:
        attn_index = max(t - 1, 0)
    tensor = scene.attention[attn_index]

    scores = score_frame(frame, grid, tensor, config.g_levels)
    k_vis, k_attn = mode_budgets(config.selection_mode, t, params)
    important = top_k(scores.visual, k_vis) | top_k(scores.attention_info, k_attn)
    previous = scene.frames[t - 1] if t > 0 else None
    static = detect_static(frame, previous, grid, config.tau)
    sets = build_token_sets(static, important, t)

    embedding = scene.embeddings[t]
    reuse_cache = kv_step(reuse_cache, embedding, sets.reuse_set, scene.weights)
    full_cache = kv_step(full_cache, embedding, set(), scene.weights)
    forward_start = time.perf_counter()
    out_reuse = attention_forward(embedding, reuse_cache, scene.weights)
    forward_seconds = time.perf_counter() - forward_start
    out_full = attention_forward(embedding, full_cache, scene.weights)
    drift_max, drift_rms = output_drift(out_full, out_reuse)

    trace.append(
        StepTrace(
            t=t,
            num_tokens=grid.num_tokens,
            static_size=len(sets.static_set),
            important_size=len(sets.important_set),
            reuse_size=len(sets.reuse_set),
            k_vis=k_vis,
            k_attn=k_attn,
            drift_max=drift_max,
            drift_rms=drift_rms,
        )
    )
    set_trace.append(token_sets_to_dict(sets, k_vis, k_attn))

    if overlay_dir is not None:
        rgb = render_overlay(frame, sets, grid)
        save_overlay(rgb, overlay_dir / f"step_{t:04d}", config.overlay_format)
    return reuse_cache, full_cache, forward_seconds


def run_sweep(
    config: RunConfig,
    budgets: list[int],
    ratio: tuple[int, int] = (2, 3),
    scene: Scene | None = None,
) -> list[dict]:
    """Re-run the pipeline at several total important-token budgets.

    Budgets split k1:k2 by the given ratio (floored). The scene is
    resolved once so every budget sees identical inputs.
    """
    if not budgets:
        raise InputError("sweep needs at least one budget")
    r1, r2 = ratio
    if r1 <= 0 or r2 <= 0:
        raise InputError("ratio parts must be positive")
    if scene is None:
        scene = resolve_scene(config)
    rows = []
    for budget in budgets:
        if budget < 0:
            raise InputError("budgets must be nonnegative")
        k1 = (budget * r1) // (r1 + r2)
        k2 = budget - k1
        cfg_fields = config.to_dict()
        cfg_fields.update(k1=k1, k2=k2, out_dir="", write_overlays=False)
        sweep_config = RunConfig(**cfg_fields)
        result = run_pipeline(sweep_config, scene=scene)
        rows.append(
            {
                "budget": budget,
                "k1": k1,
                "k2": k2,
                "total_flops": result.report.total_flops,
                "baseline_flops": result.report.baseline_flops,
                "flops_ratio": result.report.flops_ratio,
                "reuse_rate": result.report.reuse_rate,
            }
        )
    return rows

"""Entropy-guided visual token selection with exact KV-cache reuse."""

from .config import RunConfig, build_config
from .entropy import (
    AttentionTensor,
    EntropyScores,
    attention_distribution,
    attention_entropy,
    attention_information,
    mean_attention,
    normalize_visual_entropy,
    score_frame,
    visual_entropy,
)
from .frames import (
    Frame,
    GrayHistogram,
    PatchGrid,
    partition,
    patch_histogram,
    to_grayscale,
)
from .kv import (
    KVCacheState,
    ProjectionWeights,
    Provenance,
    TokenEmbedding,
    attention_forward,
    kv_step,
    output_drift,
)
from .metrics import CostModel, RunReport, StepTrace, build_report, step_flops
from .overlay import render_overlay, save_overlay
from .pipeline import PipelineResult, mode_budgets, run_pipeline, run_sweep
from .selection import (
    ScheduleParams,
    TokenSets,
    build_token_sets,
    detect_static,
    patch_cosine,
    schedule,
    schedule_at_alpha,
    select_important,
    token_sets_to_dict,
    top_k,
)
from .synth import (
    BUNDLED_SCENE_SEED,
    Scene,
    SceneSpec,
    bundled_scene_spec,
    load_scene,
    synth_scene,
    write_scene,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionTensor",
    "BUNDLED_SCENE_SEED",
    "CostModel",
    "EntropyScores",
    "Frame",
    "GrayHistogram",
    "KVCacheState",
    "PatchGrid",
    "PipelineResult",
    "ProjectionWeights",
    "Provenance",
    "RunConfig",
    "RunReport",
    "Scene",
    "SceneSpec",
    "ScheduleParams",
    "StepTrace",
    "TokenEmbedding",
    "TokenSets",
    "attention_distribution",
    "attention_entropy",
    "attention_forward",
    "attention_information",
    "build_config",
    "build_report",
    "build_token_sets",
    "bundled_scene_spec",
    "detect_static",
    "kv_step",
    "load_scene",
    "mean_attention",
    "mode_budgets",
    "normalize_visual_entropy",
    "output_drift",
    "partition",
    "patch_cosine",
    "patch_histogram",
    "render_overlay",
    "run_pipeline",
    "run_sweep",
    "save_overlay",
    "schedule",
    "schedule_at_alpha",
    "score_frame",
    "select_important",
    "step_flops",
    "synth_scene",
    "to_grayscale",
    "token_sets_to_dict",
    "top_k",
    "visual_entropy",
    "write_scene",
]

"""Command-line interface.

Subcommands: ``run`` (full pipeline), ``synth`` (generate a scene),
``entropy`` (score one frame), ``select`` (token sets for one step),
``sweep`` (vary the total important-token budget).

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from .config import RunConfig, build_config
from .errors import EntroCacheError, InputError
from .frames import partition
from .imageio import load_frame
from .entropy import AttentionTensor, score_frame
from .pipeline import mode_budgets, run_pipeline, run_sweep
from .selection import ScheduleParams, build_token_sets, detect_static, token_sets_to_dict, top_k
from .synth import SceneSpec, synth_scene, write_scene
from .tensorio import read_attention_file


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--k1", type=int, help="early attention / late visual budget")
    parser.add_argument("--k2", type=int, help="early visual / late attention budget")
    parser.add_argument("--T", type=int, dest="total_steps", help="schedule horizon in steps")
    parser.add_argument("--tau", type=float, help="static-token cosine threshold")
    parser.add_argument("--grid", help="patch grid as ROWSxCOLS, e.g. 16x16")
    parser.add_argument("--g-levels", type=int, dest="g_levels", help="gray-level count")
    parser.add_argument(
        "--attn-source",
        dest="attn_source",
        choices=("previous-frame", "same-frame"),
        help="which frame's attention tensor scores step t",
    )
    parser.add_argument(
        "--mode",
        dest="selection_mode",
        choices=("dynamic", "static", "visual", "attention"),
        help="selection mode (ablations: static alpha, single-score)",
    )
    parser.add_argument("--seed", type=int, help="seed for synthesized inputs")
    parser.add_argument("--scene", dest="scene_dir", help="scene directory to run on")
    parser.add_argument("--out", dest="out_dir", help="output directory")
    parser.add_argument("--max-frames", type=int, dest="max_frames", help="limit processed frames")
    parser.add_argument(
        "--overlay-format",
        dest="overlay_format",
        choices=("png", "pgm"),
        help="overlay image format (pgm writes one file per channel)",
    )
    parser.add_argument(
        "--no-overlays",
        action="store_true",
        help="skip per-step overlay images",
    )
    parser.add_argument(
        "--flops-per-token", type=float, dest="flops_per_token", help="cost per recomputed token"
    )
    parser.add_argument(
        "--fixed-flops", type=float, dest="fixed_flops", help="fixed cost per step"
    )


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    for f in fields(RunConfig):
        if hasattr(args, f.name):
            overrides[f.name] = getattr(args, f.name)
    if getattr(args, "grid", None):
        try:
            rows_s, _, cols_s = args.grid.lower().partition("x")
            overrides["grid_rows"] = int(rows_s)
            overrides["grid_cols"] = int(cols_s)
        except ValueError:
            raise InputError(f"--grid expects ROWSxCOLS, got {args.grid!r}")
    if getattr(args, "no_overlays", False):
        overrides["write_overlays"] = False
    return build_config(getattr(args, "config", None), **overrides)


def _cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    result = run_pipeline(config)
    report = result.report
    print(
        f"steps={report.steps} flops_ratio={report.flops_ratio:.4f} "
        f"reuse_rate={report.reuse_rate:.4f} "
        f"drift_max={report.drift_max_abs:.3e}"
    )
    print(
        f"kv forward wall-time: {result.kv_forward_seconds * 1e3:.1f} ms "
        "(hardware-dependent, non-normative)"
    )
    if config.out_dir:
        print(f"artifacts written to {config.out_dir}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    spec_kwargs = {}
    if args.spec:
        spec_kwargs = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        for key in ("object_start", "object_speed", "distractor_pos"):
            if key in spec_kwargs:
                spec_kwargs[key] = tuple(spec_kwargs[key])
    if args.steps is not None:
        spec_kwargs["steps"] = args.steps
    spec = SceneSpec(**spec_kwargs)
    scene = synth_scene(args.seed, spec)
    write_scene(scene, args.out)
    print(f"scene with {spec.steps} frames written to {args.out}")
    return 0


def _load_attention(path: str) -> AttentionTensor:
    return AttentionTensor(scores=read_attention_file(path))


def _cmd_entropy(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    frame = load_frame(args.frame)
    grid = partition(frame, config.grid_rows, config.grid_cols)
    tensor = _load_attention(args.attn)
    scores = score_frame(frame, grid, tensor, config.g_levels)
    doc = {
        "visual": scores.visual.tolist(),
        "attention_info": scores.attention_info.tolist(),
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out_file:
        Path(args.out_file).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_select(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    frame = load_frame(args.frame)
    grid = partition(frame, config.grid_rows, config.grid_cols)
    tensor = _load_attention(args.attn)
    scores = score_frame(frame, grid, tensor, config.g_levels)
    if config.k2 > grid.num_tokens:
        raise InputError(
            f"k2={config.k2} exceeds the grid's {grid.num_tokens} tokens"
        )
    params = ScheduleParams(k1=config.k1, k2=config.k2, total_steps=config.total_steps)
    k_vis, k_attn = mode_budgets(config.selection_mode, args.t, params)
    important = top_k(scores.visual, k_vis) | top_k(scores.attention_info, k_attn)
    previous = load_frame(args.prev) if args.prev else None
    static = detect_static(frame, previous, grid, config.tau)
    sets = build_token_sets(static, important, args.t)
    text = json.dumps(token_sets_to_dict(sets, k_vis, k_attn), indent=2, sort_keys=True) + "\n"
    if args.out_file:
        Path(args.out_file).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    try:
        budgets = [int(b) for b in args.budgets.split(",") if b.strip()]
        r1_s, _, r2_s = args.ratio.partition(":")
        ratio = (int(r1_s), int(r2_s))
    except ValueError:
        raise InputError(
            f"cannot parse --budgets {args.budgets!r} / --ratio {args.ratio!r}"
        )
    rows = run_sweep(config, budgets, ratio)
    header = "budget,k1,k2,total_flops,baseline_flops,flops_ratio,reuse_rate"
    print(header)
    for row in rows:
        print(
            f"{row['budget']},{row['k1']},{row['k2']},{row['total_flops']!r},"
            f"{row['baseline_flops']!r},{row['flops_ratio']!r},{row['reuse_rate']!r}"
        )
    if args.out_file:
        out = Path(args.out_file)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(f"sweep written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entrocache",
        description="Entropy-guided token selection with exact KV-cache reuse.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full pipeline over a scene")
    _add_config_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_synth = sub.add_parser("synth", help="generate a synthetic scene directory")
    p_synth.add_argument("--seed", type=int, default=2024)
    p_synth.add_argument("--steps", type=int, help="number of frames")
    p_synth.add_argument("--spec", help="JSON file of scene-spec overrides")
    p_synth.add_argument("--out", required=True, help="output scene directory")
    p_synth.set_defaults(func=_cmd_synth)

    p_entropy = sub.add_parser("entropy", help="score one frame's tokens")
    _add_config_flags(p_entropy)
    p_entropy.add_argument("--frame", required=True, help="PGM or PNG frame")
    p_entropy.add_argument("--attn", required=True, help="attention tensor (.bin or .json)")
    p_entropy.add_argument("--out-file", dest="out_file", help="write JSON here instead of stdout")
    p_entropy.set_defaults(func=_cmd_entropy)

    p_select = sub.add_parser("select", help="token sets for one step")
    _add_config_flags(p_select)
    p_select.add_argument("--frame", required=True, help="PGM or PNG frame")
    p_select.add_argument("--prev", help="previous frame (omit on the first step)")
    p_select.add_argument("--attn", required=True, help="attention tensor (.bin or .json)")
    p_select.add_argument("--t", type=int, required=True, help="timestep")
    p_select.add_argument("--out-file", dest="out_file", help="write JSON here instead of stdout")
    p_select.set_defaults(func=_cmd_select)

    p_sweep = sub.add_parser("sweep", help="vary the total important-token budget")
    _add_config_flags(p_sweep)
    p_sweep.add_argument(
        "--budgets", default="60,80,100,120,140", help="comma-separated totals"
    )
    p_sweep.add_argument("--ratio", default="2:3", help="k1:k2 split, e.g. 2:3")
    p_sweep.add_argument("--out-file", dest="out_file", help="write sweep JSON here")
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EntroCacheError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

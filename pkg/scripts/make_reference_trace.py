#!/usr/bin/env python3
"""Generate the committed reference trace for the bundled demo scene.

This is a deliberately plain, loop-based re-implementation of the whole
per-step pipeline — histogram entropy, averaged-attention softmax scores,
the timestep budget schedule, union top-k selection, cosine static
detection, reuse-set algebra, cache reuse with drift measurement, and
flops accounting — written against the on-disk scene files only. It
imports nothing from the package and uses no numpy, so it cannot share a
bug with the implementation it checks.

Usage:
    entrocache synth --seed 2024 --out /tmp/bundled_scene
    python3 scripts/make_reference_trace.py /tmp/bundled_scene data/reference_trace.json

The output must match the pipeline's trace.json byte for byte when the
pipeline runs the same scene under the default configuration below.
"""

from __future__ import annotations

import json
import math
import struct
import sys
from pathlib import Path

# Default run configuration, kept in lockstep with the package defaults.
K1 = 40
K2 = 60
TOTAL_STEPS = 100
TAU = 0.996
G_LEVELS = 256
GRID_ROWS = 16
GRID_COLS = 16
FLOPS_PER_TOKEN = 1.0
FIXED_FLOPS = 0.0
# attention source: the tensor of the previous frame scores step t (t=0
# falls back to tensor 0)

# Distinct score values closer than this would make top-k rankings depend
# on last-ulp rounding; the generator refuses to emit a fragile oracle.
SCORE_GAP = 1e-9

HEADER = struct.Struct("<4sIIIII8x")


def read_pgm(path):
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise SystemExit(f"{path}: not a P5 PGM")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    width, height, maxval = fields
    if maxval > 255:
        raise SystemExit(f"{path}: 16-bit PGM unsupported")
    pos += 1
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise SystemExit(f"{path}: truncated raster")
    return width, height, list(raster)


def read_container(path, magic):
    data = path.read_bytes()
    got_magic, version, d0, d1, d2, d3 = HEADER.unpack_from(data)
    if got_magic != magic or version != 1:
        raise SystemExit(f"{path}: unexpected header {got_magic!r} v{version}")
    count = d0 * d1 * d2 * d3
    values = list(struct.unpack_from(f"<{count}d", data, HEADER.size))
    return (d0, d1, d2, d3), values


def check_gaps(values, label, step):
    ordered = sorted(set(values))
    for a, b in zip(ordered, ordered[1:]):
        if b - a <= SCORE_GAP:
            raise SystemExit(
                f"fragile oracle: {label} scores at step {step} differ by "
                f"{b - a:.3e}; adjust the scene"
            )


def visual_scores(pixels, width, height, step):
    patch_h = height // GRID_ROWS
    patch_w = width // GRID_COLS
    scores = []
    for token in range(GRID_ROWS * GRID_COLS):
        row0 = (token // GRID_COLS) * patch_h
        col0 = (token % GRID_COLS) * patch_w
        counts = [0] * G_LEVELS
        for y in range(row0, row0 + patch_h):
            base = y * width
            for x in range(col0, col0 + patch_w):
                counts[pixels[base + x]] += 1
        total = patch_h * patch_w
        entropy = 0.0
        for count in counts:
            if count:
                p = count / total
                entropy -= p * math.log2(p)
        scores.append(entropy / math.log2(G_LEVELS))
    check_gaps(scores, "visual", step)
    return scores


def attention_scores(dims, flat, step):
    layers, heads, n_text, n_visual = dims
    mean = [[0.0] * n_visual for _ in range(n_text)]
    for l in range(layers):
        for h in range(heads):
            base_lh = (l * heads + h) * n_text * n_visual
            for w in range(n_text):
                base = base_lh + w * n_visual
                row = mean[w]
                for i in range(n_visual):
                    row[i] += flat[base + i]
    scale = 1.0 / (layers * heads)
    for w in range(n_text):
        for i in range(n_visual):
            mean[w][i] *= scale

    scores = []
    log_w = math.log2(n_text) if n_text > 1 else 0.0
    for i in range(n_visual):
        column = [mean[w][i] for w in range(n_text)]
        peak = max(column)
        exps = [math.exp(v - peak) for v in column]
        denom = sum(exps)
        q = [e / denom for e in exps]
        entropy = 0.0
        for p in q:
            if p > 0:
                entropy -= p * math.log2(p)
        scores.append(1.0 if n_text == 1 else 1.0 - entropy / log_w)
    check_gaps(scores, "attention", step)
    return scores


def schedule(t):
    clamped = min(max(t, 0), TOTAL_STEPS)
    num = (K2 - K1) * clamped
    k_vis = K2 - (num + TOTAL_STEPS - 1) // TOTAL_STEPS
    k_attn = K1 + num // TOTAL_STEPS
    return k_vis, k_attn


def top_k(scores, k):
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return set(order[:k])


def static_tokens(pixels, prev_pixels, width, height):
    patch_h = height // GRID_ROWS
    patch_w = width // GRID_COLS
    static = set()
    for token in range(GRID_ROWS * GRID_COLS):
        row0 = (token // GRID_COLS) * patch_h
        col0 = (token % GRID_COLS) * patch_w
        duv = duu = dvv = 0
        identical = True
        for y in range(row0, row0 + patch_h):
            base = y * width
            for x in range(col0, col0 + patch_w):
                u = pixels[base + x]
                v = prev_pixels[base + x]
                duv += u * v
                duu += u * u
                dvv += v * v
                if u != v:
                    identical = False
        if duu == 0 and dvv == 0:
            cos = 1.0
        elif duu == 0 or dvv == 0:
            cos = 0.0
        elif duv * duv == duu * dvv:
            cos = 1.0 if duv > 0 else -1.0
        else:
            cos = duv / math.sqrt(duu * dvv)
        if cos >= TAU:
            if not identical:
                raise SystemExit(
                    f"scene breaks the exact-reuse design: token {token} is "
                    "static by cosine but its pixels changed"
                )
            static.add(token)
    return static


def matmul_rows(x_rows, weight_rows, out_cols):
    # x: n rows of d_model; weight: d_model rows of out_cols
    weight_cols = [
        [row[c] for row in weight_rows] for c in range(out_cols)
    ]
    result = []
    for x in x_rows:
        result.append(
            [sum(a * b for a, b in zip(x, col)) for col in weight_cols]
        )
    return result


def attention_output(x_rows, keys, values, w_q_rows, d_k, d_v):
    queries = matmul_rows(x_rows, w_q_rows, d_k)
    inv_scale = 1.0 / math.sqrt(d_k)
    value_cols = [[row[d] for row in values] for d in range(d_v)]
    out = []
    for q in queries:
        logits = [
            sum(a * b for a, b in zip(q, key)) * inv_scale for key in keys
        ]
        peak = max(logits)
        exps = [math.exp(v - peak) for v in logits]
        denom = sum(exps)
        probs = [e / denom for e in exps]
        out.append(
            [sum(p * v for p, v in zip(probs, col)) for col in value_cols]
        )
    return out


def main():
    if len(sys.argv) != 3:
        raise SystemExit(
            "usage: make_reference_trace.py SCENE_DIR OUT_JSON"
        )
    scene_dir = Path(sys.argv[1])
    out_path = Path(sys.argv[2])

    frame_paths = sorted((scene_dir / "frames").glob("*.pgm"))
    attn_paths = sorted((scene_dir / "attn").glob("*.bin"))
    embed_paths = sorted((scene_dir / "embed").glob("*.bin"))
    if not (len(frame_paths) == len(attn_paths) == len(embed_paths) > 0):
        raise SystemExit(f"{scene_dir}: inconsistent scene layout")
    steps = len(frame_paths)

    frames = [read_pgm(p) for p in frame_paths]
    width, height, _ = frames[0]
    num_tokens = GRID_ROWS * GRID_COLS

    wk_dims, wk_flat = read_container(scene_dir / "weights" / "wk.bin", b"WGHT")
    wv_dims, wv_flat = read_container(scene_dir / "weights" / "wv.bin", b"WGHT")
    wq_dims, wq_flat = read_container(scene_dir / "weights" / "wq.bin", b"WGHT")
    d_model, d_k = wk_dims[0], wk_dims[1]
    d_v = wv_dims[1]
    w_k = [wk_flat[r * d_k : (r + 1) * d_k] for r in range(d_model)]
    w_v = [wv_flat[r * d_v : (r + 1) * d_v] for r in range(d_model)]
    w_q = [wq_flat[r * wq_dims[1] : (r + 1) * wq_dims[1]] for r in range(d_model)]

    embeddings = []
    for path in embed_paths:
        dims, flat = read_container(path, b"EMBD")
        if dims[0] != num_tokens or dims[1] != d_model:
            raise SystemExit(f"{path}: embedding dims {dims} unexpected")
        embeddings.append(
            [flat[r * d_model : (r + 1) * d_model] for r in range(num_tokens)]
        )

    keys_reuse = values_reuse = None
    keys_full = values_full = None
    sets_out = []
    per_step = []
    total_flops = 0.0
    baseline_flops = 0.0
    reused_total = 0
    drift_max_overall = 0.0
    drift_sq_sum = 0.0

    for t in range(steps):
        f_width, f_height, pixels = frames[t]
        visual = visual_scores(pixels, f_width, f_height, t)
        attn_dims, attn_flat = read_container(attn_paths[max(t - 1, 0)], b"ATTN")
        attention = attention_scores(attn_dims, attn_flat, t)

        k_vis, k_attn = schedule(t)
        important = top_k(visual, k_vis) | top_k(attention, k_attn)

        if t == 0:
            static = set()
        else:
            static = static_tokens(pixels, frames[t - 1][2], f_width, f_height)
        reuse = static - important

        x_rows = embeddings[t]
        new_keys_full = matmul_rows(x_rows, w_k, d_k)
        new_values_full = matmul_rows(x_rows, w_v, d_v)
        new_keys_reuse = [row[:] for row in new_keys_full]
        new_values_reuse = [row[:] for row in new_values_full]
        for i in reuse:
            new_keys_reuse[i] = keys_reuse[i]
            new_values_reuse[i] = values_reuse[i]
        keys_full, values_full = new_keys_full, new_values_full
        keys_reuse, values_reuse = new_keys_reuse, new_values_reuse

        out_full = attention_output(x_rows, keys_full, values_full, w_q, d_k, d_v)
        out_reuse = attention_output(x_rows, keys_reuse, values_reuse, w_q, d_k, d_v)
        drift_max = 0.0
        sq_acc = 0.0
        cells = 0
        for row_f, row_r in zip(out_full, out_reuse):
            for a, b in zip(row_f, row_r):
                diff = a - b
                drift_max = max(drift_max, abs(diff))
                sq_acc += diff * diff
                cells += 1
        drift_rms = math.sqrt(sq_acc / cells)

        flops = FIXED_FLOPS + (num_tokens - len(reuse)) * FLOPS_PER_TOKEN
        total_flops += flops
        baseline_flops += FIXED_FLOPS + num_tokens * FLOPS_PER_TOKEN
        reused_total += len(reuse)
        drift_max_overall = max(drift_max_overall, drift_max)
        drift_sq_sum += drift_rms * drift_rms

        sets_out.append(
            {
                "t": t,
                "static": sorted(static),
                "important": sorted(important),
                "reuse": sorted(reuse),
                "k_vis": k_vis,
                "k_attn": k_attn,
            }
        )
        per_step.append(
            {
                "t": t,
                "n_static": len(static),
                "n_important": len(important),
                "n_reuse": len(reuse),
                "k_vis": k_vis,
                "k_attn": k_attn,
                "flops": flops,
            }
        )
        print(
            f"step {t:3d}: |static|={len(static):3d} |important|={len(important):3d} "
            f"|reuse|={len(reuse):3d} drift=({drift_max:.1e}, {drift_rms:.1e})"
        )

    report = {
        "steps": steps,
        "per_step": per_step,
        "total_flops": total_flops,
        "baseline_flops": baseline_flops,
        "flops_ratio": total_flops / baseline_flops if baseline_flops > 0 else 1.0,
        "reuse_rate": reused_total / (steps * num_tokens),
        "drift_summary": {
            "max_abs": drift_max_overall,
            "rms": math.sqrt(drift_sq_sum / steps),
        },
    }
    trace = {"sets": sets_out, "report": report}
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(
        json.dumps(trace, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"reference trace written to {out_path}")


if __name__ == "__main__":
    main()

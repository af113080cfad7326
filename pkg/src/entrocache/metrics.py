"""Computation-savings accounting and the per-run report."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import EmptyTrace


@dataclass(frozen=True)
class CostModel:
    """Cost units per recomputed token plus a fixed per-step term."""

    flops_per_token: float = 1.0
    fixed_flops: float = 0.0

    def __post_init__(self):
        if self.flops_per_token < 0 or self.fixed_flops < 0:
            raise ValueError("cost model terms must be nonnegative")


def step_flops(num_tokens: int, num_reused: int, model: CostModel) -> float:
    """Modeled cost of one step: fixed plus per recomputed token."""
    if not 0 <= num_reused <= num_tokens:
        raise ValueError(
            f"reused count {num_reused} outside [0, {num_tokens}]"
        )
    return model.fixed_flops + (num_tokens - num_reused) * model.flops_per_token


@dataclass(frozen=True)
class StepTrace:
    """Raw per-step quantities recorded by the pipeline."""

    t: int
    num_tokens: int
    static_size: int
    important_size: int
    reuse_size: int
    k_vis: int
    k_attn: int
    drift_max: float = 0.0
    drift_rms: float = 0.0


@dataclass(frozen=True)
class RunReport:
    """Aggregated run statistics.

    drift_rms pools per-step RMS values as sqrt(mean of squares), which
    equals the elementwise RMS over the whole rollout when every step
    compares equally sized outputs.
    """

    steps: int
    per_step: list[dict] = field(repr=False)
    total_flops: float
    baseline_flops: float
    flops_ratio: float
    reuse_rate: float
    drift_max_abs: float
    drift_rms: float

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "per_step": self.per_step,
            "total_flops": self.total_flops,
            "baseline_flops": self.baseline_flops,
            "flops_ratio": self.flops_ratio,
            "reuse_rate": self.reuse_rate,
            "drift_summary": {
                "max_abs": self.drift_max_abs,
                "rms": self.drift_rms,
            },
        }

    def to_json(self) -> str:
        """Canonical JSON: sorted keys, two-space indent, trailing newline."""
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        """One line per step for plotting."""
        lines = ["t,n_static,n_important,n_reuse,k_vis,k_attn,flops"]
        for row in self.per_step:
            lines.append(
                f"{row['t']},{row['n_static']},{row['n_important']},"
                f"{row['n_reuse']},{row['k_vis']},{row['k_attn']},{row['flops']!r}"
            )
        return "\n".join(lines) + "\n"


def build_report(trace: list[StepTrace], model: CostModel) -> RunReport:
    """Aggregate a per-step trace under a cost model.

    The baseline recomputes every token at every step; the ratio of the
    two totals is the run's modeled savings figure.
    """
    if not trace:
        raise EmptyTrace("cannot report on an empty trace")
    num_tokens = trace[0].num_tokens
    per_step = []
    total = 0.0
    baseline = 0.0
    reused_tokens = 0
    drift_max = 0.0
    drift_sq_sum = 0.0
    for record in trace:
        if record.num_tokens != num_tokens:
            raise ValueError("token count changed mid-trace")
        flops = step_flops(record.num_tokens, record.reuse_size, model)
        per_step.append(
            {
                "t": record.t,
                "n_static": record.static_size,
                "n_important": record.important_size,
                "n_reuse": record.reuse_size,
                "k_vis": record.k_vis,
                "k_attn": record.k_attn,
                "flops": flops,
            }
        )
        total += flops
        baseline += step_flops(record.num_tokens, 0, model)
        reused_tokens += record.reuse_size
        drift_max = max(drift_max, record.drift_max)
        drift_sq_sum += record.drift_rms * record.drift_rms
    steps = len(trace)
    ratio = total / baseline if baseline > 0 else 1.0
    return RunReport(
        steps=steps,
        per_step=per_step,
        total_flops=total,
        baseline_flops=baseline,
        flops_ratio=ratio,
        reuse_rate=reused_tokens / (steps * num_tokens),
        drift_max_abs=drift_max,
        drift_rms=math.sqrt(drift_sq_sum / steps),
    )

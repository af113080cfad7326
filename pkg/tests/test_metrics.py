import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from entrocache.errors import EmptyTrace
from entrocache.metrics import (
    CostModel,
    RunReport,
    StepTrace,
    build_report,
    step_flops,
)


def make_trace(reuse_sizes, n=256):
    return [
        StepTrace(
            t=t,
            num_tokens=n,
            static_size=min(n, r + 10),
            important_size=40,
            reuse_size=r,
            k_vis=50,
            k_attn=50,
        )
        for t, r in enumerate(reuse_sizes)
    ]


class TestStepFlops:
    def test_no_reuse_is_baseline(self):
        m = CostModel(flops_per_token=2.0, fixed_flops=7.0)
        assert step_flops(100, 0, m) == 7.0 + 200.0

    def test_full_reuse_leaves_fixed_cost(self):
        m = CostModel(flops_per_token=2.0, fixed_flops=7.0)
        assert step_flops(100, 100, m) == 7.0

    def test_arithmetic(self):
        m = CostModel(flops_per_token=1.0, fixed_flops=0.0)
        assert step_flops(256, 100, m) == 156.0

    def test_reuse_beyond_tokens_rejected(self):
        with pytest.raises(ValueError):
            step_flops(10, 11, CostModel())

    def test_negative_cost_rejected(self):
        with pytest.raises(ValueError):
            CostModel(flops_per_token=-1.0)


class TestBuildReport:
    def test_empty_reuse_gives_ratio_one(self):
        report = build_report(make_trace([0, 0, 0]), CostModel())
        assert report.flops_ratio == 1.0
        assert report.reuse_rate == 0.0

    def test_half_reuse_gives_ratio_half(self):
        report = build_report(make_trace([128] * 10), CostModel(1.0, 0.0))
        assert report.flops_ratio == 0.5
        assert report.reuse_rate == 0.5

    def test_empty_trace_rejected(self):
        with pytest.raises(EmptyTrace):
            build_report([], CostModel())

    def test_matches_independent_reaggregation(self, rng):
        reuse_sizes = rng.integers(0, 257, size=100).tolist()
        model = CostModel(flops_per_token=3.0, fixed_flops=11.0)
        report = build_report(make_trace(reuse_sizes), model)
        # spreadsheet-style recomputation from the raw trace
        flops = [11.0 + (256 - r) * 3.0 for r in reuse_sizes]
        assert report.total_flops == pytest.approx(sum(flops), rel=0, abs=0)
        assert report.baseline_flops == pytest.approx(
            100 * (11.0 + 256 * 3.0), rel=0, abs=0
        )
        assert report.flops_ratio == pytest.approx(
            sum(flops) / (100 * (11.0 + 256 * 3.0)), rel=1e-15
        )
        assert report.reuse_rate == pytest.approx(
            sum(reuse_sizes) / (100 * 256), rel=1e-15
        )

    def test_report_conservation(self, rng):
        reuse_sizes = rng.integers(0, 257, size=40).tolist()
        report = build_report(make_trace(reuse_sizes), CostModel(2.0, 5.0))
        assert report.total_flops == sum(row["flops"] for row in report.per_step)

    @given(
        lower=st.lists(st.integers(min_value=0, max_value=128), min_size=3, max_size=30)
    )
    def test_monotone_in_reuse_rate(self, lower):
        # raising every step's reuse strictly lowers the ratio (no fixed cost)
        model = CostModel(flops_per_token=1.0, fixed_flops=0.0)
        higher = [r + 1 for r in lower]
        ratio_low = build_report(make_trace(lower), model).flops_ratio
        ratio_high = build_report(make_trace(higher), model).flops_ratio
        assert ratio_high < ratio_low

    def test_token_count_change_rejected(self):
        trace = make_trace([0, 0]) + make_trace([0], n=128)
        with pytest.raises(ValueError):
            build_report(trace, CostModel())

    def test_drift_aggregation(self):
        trace = [
            StepTrace(
                t=t,
                num_tokens=4,
                static_size=0,
                important_size=0,
                reuse_size=0,
                k_vis=1,
                k_attn=1,
                drift_max=m,
                drift_rms=r,
            )
            for t, (m, r) in enumerate([(0.0, 0.0), (3.0, 1.0), (1.0, 1.0)])
        ]
        report = build_report(trace, CostModel())
        assert report.drift_max_abs == 3.0
        assert report.drift_rms == pytest.approx((2.0 / 3.0) ** 0.5, rel=1e-15)


class TestSerialization:
    def test_json_canonical_and_stable(self):
        report = build_report(make_trace([5, 6]), CostModel())
        text = report.to_json()
        assert text.endswith("\n")
        assert json.loads(text)["steps"] == 2
        assert text == report.to_json()
        # sorted keys at top level
        doc = json.loads(text)
        assert list(doc.keys()) == sorted(doc.keys())

    def test_csv_one_line_per_step(self):
        report = build_report(make_trace([5, 6, 7]), CostModel())
        lines = report.to_csv().splitlines()
        assert lines[0] == "t,n_static,n_important,n_reuse,k_vis,k_attn,flops"
        assert len(lines) == 4
        assert lines[1].split(",")[3] == "5"

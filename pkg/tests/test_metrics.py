import math

import pytest
from hypothesis import given, strategies as st

from hpcbench.errors import (
    DegenerateComm,
    DegenerateTarget,
    EmptySample,
    InvalidPower,
    InvalidScaleOrder,
)
from hpcbench.metrics import (
    check_profiled_flops_per_sample,
    flops_per_sample_from_profile,
    parallel_efficiency,
    penalty_coefficient,
    scaling_ratio,
    score_run,
    throughput_flops,
    vflops,
    vflops_per_watt,
)
from hpcbench.units import GIGA, TERA


def penalty_oracle(achieved, target, n):
    # independent of pow(): repeated multiplication
    ratio = achieved / target
    out = 1.0
    for _ in range(n):
        out *= ratio
    return out


class TestPenaltyCoefficient:
    def test_meeting_target_is_neutral(self):
        assert penalty_coefficient(0.763, 0.763, 5) == 1.0

    def test_ratio_09_n10(self):
        expected = penalty_oracle(0.9, 1.0, 10)
        got = penalty_coefficient(0.9, 1.0, 10)
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(0.34868, abs=5e-6)

    def test_ratio_099_n5(self):
        got = penalty_coefficient(0.99, 1.0, 5)
        assert got == pytest.approx(penalty_oracle(0.99, 1.0, 5), rel=1e-12)
        assert got == pytest.approx(0.95099, abs=5e-6)

    def test_exceeding_target_awards(self):
        assert penalty_coefficient(0.8, 0.763, 5) > 1.0

    def test_degenerate_target(self):
        with pytest.raises(DegenerateTarget):
            penalty_coefficient(0.5, 0.0, 5)

    @given(st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.integers(1, 20))
    def test_matches_oracle_everywhere(self, achieved, target, n):
        assert penalty_coefficient(achieved, target, n) == pytest.approx(
            penalty_oracle(achieved, target, n), rel=1e-9)

    @given(st.floats(0.1, 0.9), st.floats(0.01, 0.09), st.integers(1, 15))
    def test_strictly_increasing_in_achieved(self, achieved, delta, n):
        target = 0.95
        lo = penalty_coefficient(achieved, target, n)
        hi = penalty_coefficient(achieved + delta, target, n)
        assert hi > lo

    @given(st.floats(0.3, 0.9), st.floats(0.01, 0.09), st.integers(1, 15))
    def test_strictly_decreasing_in_target(self, target, delta, n):
        achieved = 0.5
        assert (penalty_coefficient(achieved, target + delta, n)
                < penalty_coefficient(achieved, target, n))

    @given(st.floats(0.2, 0.9), st.integers(1, 14))
    def test_below_target_decreasing_in_n(self, achieved, n):
        assert (penalty_coefficient(achieved, 0.95, n + 1)
                < penalty_coefficient(achieved, 0.95, n))

    @given(st.floats(0.05, 1.0), st.integers(1, 20))
    def test_equal_quality_always_one(self, q, n):
        assert penalty_coefficient(q, q, n) == pytest.approx(1.0, rel=1e-12)


class TestVflops:
    def test_unit_penalty(self):
        assert vflops(100 * TERA, 0.763, 0.763, 5) == 100 * TERA

    def test_published_pair_implied_quality(self):
        # Invert the penalty on the 939 TFLOPS -> 642 TVFLOPS pair
        # (n=5, target 0.763): the implied quality lands near 0.7071
        # and the forward computation reproduces the score.
        implied = 0.763 * (642 / 939) ** (1 / 5)
        assert 0.70 <= implied <= 0.72
        assert vflops(939 * TERA, implied, 0.763, 5) == pytest.approx(
            642 * TERA, rel=1e-9)

    def test_zero_quality_annihilates(self):
        assert vflops(123 * TERA, 0.0, 0.763, 5) == 0.0

    def test_ranking_follows_quality_at_equal_flops(self):
        flops = 500 * TERA
        qualities = [0.70, 0.74, 0.763, 0.72, 0.768]
        scores = [vflops(flops, q, 0.763, 5) for q in qualities]
        assert sorted(range(5), key=lambda i: scores[i]) == \
            sorted(range(5), key=lambda i: qualities[i])


class TestVflopsPerWatt:
    def test_division(self):
        assert vflops_per_watt(642e12, 1e5) == pytest.approx(6.42e9)

    def test_zero_score(self):
        assert vflops_per_watt(0.0, 2.5e4) == 0.0

    def test_unit_power(self):
        assert vflops_per_watt(3.3e12, 1.0) == 3.3e12

    def test_invalid_power(self):
        with pytest.raises(InvalidPower):
            vflops_per_watt(1e12, 0.0)


class TestThroughput:
    def test_ewa_single_node(self):
        # 46 samples/s across 8 ranks at 691 GFLOPs each ~ 31.8 TFLOPS,
        # within 3% of the published 31 TFLOPS.
        got = throughput_flops(46 / 8, 8, 691 * GIGA)
        assert got == pytest.approx(31.786 * TERA, rel=1e-9)
        assert got == pytest.approx(31 * TERA, rel=0.03)

    def test_identity(self):
        assert throughput_flops(1, 1, 7.7) == 7.7

    def test_ic_single_node(self):
        got = throughput_flops(328, 8, 22.1e9)
        assert got == pytest.approx(58 * TERA, rel=0.05)

    def test_zero_inputs_yield_zero(self):
        assert throughput_flops(0, 8, 1e9) == 0.0


class TestFlopsPerSample:
    def test_profile_division(self):
        assert flops_per_sample_from_profile(345.66 * TERA, 500) == \
            pytest.approx(691.32 * GIGA, abs=0.01 * GIGA)

    def test_single_sample_identity(self):
        assert flops_per_sample_from_profile(42.0, 1) == 42.0

    def test_division_oracle(self):
        assert flops_per_sample_from_profile(1e12, 4) == 2.5e11

    def test_empty_sample(self):
        with pytest.raises(EmptySample):
            flops_per_sample_from_profile(1e12, 0)

    def test_declared_value_consistent(self):
        check = check_profiled_flops_per_sample(345.66 * TERA, 500, 691 * GIGA)
        assert check.consistent
        assert check.computed == pytest.approx(691.32 * GIGA)

    def test_declared_value_mismatch_flagged(self):
        # A profile of 2877.06 TFLOPs over 12800 samples computes to
        # ~224.8 GFLOPs/sample; a declared 23 GFLOPs is flagged, and
        # both values are reported rather than silently reconciled.
        check = check_profiled_flops_per_sample(2877.06 * TERA, 12800,
                                                23 * GIGA)
        assert not check.consistent
        assert check.computed == pytest.approx(224.77 * GIGA, rel=1e-3)
        assert check.declared == 23 * GIGA
        assert check.relative_error > 8.0


class TestScalingRatio:
    def test_ewa_row(self):
        assert round(scaling_ratio(691 * GIGA, 41_000_000), 2) == 16.85

    def test_ic_row(self):
        assert round(scaling_ratio(2944 * GIGA, 25_000_000), 2) == 117.76

    def test_unit_ratio(self):
        assert scaling_ratio(1 * GIGA, 1_000_000) == 1.0

    def test_degenerate_comm(self):
        with pytest.raises(DegenerateComm):
            scaling_ratio(1e9, 0)


class TestParallelEfficiency:
    def test_perfect_scaling(self):
        assert parallel_efficiency(3.0, 8, 6.0, 16) == 1.0

    def test_arithmetic(self):
        assert parallel_efficiency(100.0, 8, 182.0, 16) == pytest.approx(0.91)

    def test_identity(self):
        assert parallel_efficiency(5.5, 4, 5.5, 4) == 1.0

    def test_scale_order(self):
        with pytest.raises(InvalidScaleOrder):
            parallel_efficiency(1.0, 16, 1.0, 8)


class TestComposition:
    @given(st.floats(1, 1e3), st.integers(1, 64), st.floats(1e6, 1e12),
           st.integers(1, 100))
    def test_throughput_of_profiled_sample_work(self, n, r, c, k):
        per_sample = flops_per_sample_from_profile(c * k, k)
        assert throughput_flops(n, r, per_sample) == pytest.approx(
            n * r * c, rel=1e-9)

    def test_purity(self):
        args = (0.7132, 0.763, 7)
        assert penalty_coefficient(*args) == penalty_coefficient(*args)


class TestScoreRun:
    def test_score_fields_consistent(self, ranking_runs):
        runs, _ = ranking_runs
        run = runs[0]
        score = score_run(run)
        assert score.vflops == pytest.approx(score.flops * score.penalty,
                                             rel=1e-12)
        assert score.time_to_quality == run.wall_time
        assert score.vflops_per_watt == pytest.approx(
            score.vflops / run.average_power)

    def test_per_watt_absent_without_power(self, ranking_runs):
        from dataclasses import replace
        runs, _ = ranking_runs
        run = replace(runs[0], average_power=None)
        assert score_run(run).vflops_per_watt is None

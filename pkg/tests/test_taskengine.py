import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sonoctl.errors import EmptyRecords, InsufficientData, InvalidConfig
from sonoctl.taskengine import (
    HOLD_ON_ENTRY,
    HOLD_ON_PRESENTATION,
    TaskConfig,
    TrialRecord,
    TrialRunner,
    band_halfwidth,
    compute_metrics,
    fitts_analysis,
    generate_schedule,
    index_of_difficulty,
    quantization_bound,
)

RATE = 10.0


def run_trace(cfg, targets, p_of_time, n_max=100000):
    """Drive a runner with p = f(time) until the schedule is exhausted."""
    from sonoctl.taskengine import TargetSchedule
    runner = TrialRunner(TargetSchedule(tuple(targets)), cfg, RATE)
    k = 0
    while not runner.done and k < n_max:
        t = k / RATE
        runner.step(t, p_of_time(t))
        k += 1
    return runner.records


class TestQuantizationBound:
    def test_five_positions(self):
        assert quantization_bound(5) == pytest.approx(12.5, abs=1e-12)

    def test_eleven_positions(self):
        assert quantization_bound(11) == pytest.approx(5.0, abs=1e-12)

    def test_two_positions_tile_the_range(self):
        assert quantization_bound(2) == pytest.approx(50.0, abs=1e-12)

    def test_invalid(self):
        with pytest.raises(InvalidConfig):
            quantization_bound(1)

    def test_fraction_matches_percent(self):
        assert band_halfwidth(11) == pytest.approx(0.05, abs=1e-15)


class TestGenerateSchedule:
    def test_extended_protocol_counts(self):
        cfg = TaskConfig(n_positions=11, hold_time_s=10.0, trials_per_level=3, rng_seed=5)
        sched = generate_schedule(cfg)
        assert len(sched) == 33
        counts = Counter(sched.targets)
        assert all(c == 3 for c in counts.values())
        assert len(counts) == 11

    def test_single_pass_is_permutation(self):
        cfg = TaskConfig(n_positions=5, hold_time_s=1.0, trials_per_level=1, rng_seed=1)
        sched = generate_schedule(cfg)
        assert sorted(sched.targets) == [0.0, 0.25, 0.5, 0.75, 1.0]

    def test_duplicates_only_at_pass_boundaries(self):
        for seed in range(50):
            cfg = TaskConfig(n_positions=11, trials_per_level=3, rng_seed=seed)
            sched = generate_schedule(cfg)
            for i, (a, b) in enumerate(zip(sched.targets, sched.targets[1:])):
                if a == b:
                    assert (i + 1) % cfg.n_positions == 0

    def test_seed_determinism_over_100_seeds(self):
        cfg0 = TaskConfig(n_positions=11, trials_per_level=3)
        multiset = sorted(generate_schedule(cfg0).targets)
        orders = set()
        for seed in range(100):
            from dataclasses import replace
            cfg = replace(cfg0, rng_seed=seed)
            a = generate_schedule(cfg)
            b = generate_schedule(cfg)
            assert a.targets == b.targets
            assert sorted(a.targets) == multiset
            orders.add(a.targets)
        assert len(orders) > 95  # seeds shuffle the order


class TestTaskConfig:
    def test_on_entry_requires_timeout(self):
        with pytest.raises(InvalidConfig):
            TaskConfig(hold_mode=HOLD_ON_ENTRY, timeout_s=None)

    def test_bad_values(self):
        with pytest.raises(InvalidConfig):
            TaskConfig(n_positions=1)
        with pytest.raises(InvalidConfig):
            TaskConfig(hold_time_s=0)
        with pytest.raises(InvalidConfig):
            TaskConfig(hold_mode="sometimes")


class TestTrialRunner:
    def test_on_presentation_entry_at_two_seconds(self):
        cfg = TaskConfig(n_positions=5, hold_time_s=10.0, hold_mode=HOLD_ON_PRESENTATION)
        records = run_trace(cfg, [0.5], lambda t: 0.5 if t >= 2.0 else 0.0)
        (r,) = records
        assert r.acquired
        assert r.movement_time == pytest.approx(2.0, abs=1e-9)
        assert len(r.trace) == 100  # exactly T_H of ticks
        assert r.trace[-1][0] == pytest.approx(9.9, abs=1e-9)

    def test_on_entry_timeout(self):
        cfg = TaskConfig(n_positions=5, hold_time_s=15.0, timeout_s=30.0,
                         hold_mode=HOLD_ON_ENTRY)
        records = run_trace(cfg, [1.0], lambda t: 0.0)
        (r,) = records
        assert not r.acquired
        assert r.movement_time is None
        assert len(r.trace) == 300  # T_to of ticks

    def test_on_entry_hold_starts_at_entry(self):
        cfg = TaskConfig(n_positions=5, hold_time_s=2.0, timeout_s=30.0,
                         hold_mode=HOLD_ON_ENTRY)
        records = run_trace(cfg, [0.5], lambda t: 0.5 if t >= 1.0 else 0.0)
        (r,) = records
        assert r.acquired
        assert r.movement_time == pytest.approx(1.0, abs=1e-9)
        assert len(r.trace) == 10 + 20  # approach + hold ticks

    def test_start_inside_band_means_zero_movement_time(self):
        for mode, timeout in ((HOLD_ON_ENTRY, 30.0), (HOLD_ON_PRESENTATION, None)):
            cfg = TaskConfig(n_positions=5, hold_time_s=1.0, timeout_s=timeout,
                             hold_mode=mode)
            (r,) = run_trace(cfg, [0.25], lambda t: 0.25)
            assert r.acquired
            assert r.movement_time == 0.0

    def test_band_membership_closed_inequality(self):
        cfg = TaskConfig(n_positions=5, hold_time_s=1.0)  # q = 0.125
        (r,) = run_trace(cfg, [0.25], lambda t: 0.375)  # exactly on the edge
        assert r.acquired

    def test_leaving_band_does_not_revoke(self):
        cfg = TaskConfig(n_positions=5, hold_time_s=2.0)
        (r,) = run_trace(cfg, [0.5], lambda t: 0.5 if t < 0.5 else 1.0)
        assert r.acquired
        assert r.movement_time == 0.0

    def test_on_presentation_trials_last_exactly_hold_time(self):
        cfg = TaskConfig(n_positions=3, hold_time_s=1.5, trials_per_level=2)
        records = run_trace(cfg, [0.0, 0.5, 1.0, 0.5, 0.0, 1.0], lambda t: 0.5)
        assert len(records) == 6
        for r in records:
            assert len(r.trace) == 15

    def test_all_targets_consumed_in_order(self):
        cfg = TaskConfig(n_positions=3, hold_time_s=1.0)
        targets = [0.0, 1.0, 0.5]
        records = run_trace(cfg, targets, lambda t: 0.5)
        assert [r.target for r in records] == targets


class TestComputeMetrics:
    def _single(self, cfg, target, p_of_time):
        records = run_trace(cfg, [target], p_of_time)
        return compute_metrics(records, cfg).trials[0]

    def test_perfect_hold(self):
        cfg = TaskConfig(n_positions=5, hold_time_s=2.0)
        t = self._single(cfg, 0.5, lambda t: 0.5)
        assert t.position_error == 0.0
        assert t.stability_error == 0.0

    def test_constant_offset(self):
        cfg = TaskConfig(n_positions=5, hold_time_s=2.0)
        t = self._single(cfg, 0.5, lambda t: 0.52)
        assert t.position_error == pytest.approx(2.0, abs=1e-9)
        assert t.stability_error == pytest.approx(0.0, abs=1e-9)

    def test_sinusoidal_trace(self):
        # full periods of target + 0.05 sin: mean error ~0, population std
        # exactly 0.05/sqrt(2) of range = ~3.5355%
        cfg = TaskConfig(n_positions=5, hold_time_s=10.0)
        f = lambda t: 0.5 + 0.05 * math.sin(2 * math.pi * t)
        t = self._single(cfg, 0.5, f)
        assert t.position_error == pytest.approx(0.0, abs=1e-6)
        assert t.stability_error == pytest.approx(5.0 / math.sqrt(2), abs=1e-6)

    def test_metrics_match_bruteforce(self):
        # independent oracle: plain-python summation over the logged window
        cfg = TaskConfig(n_positions=11, hold_time_s=3.0)
        rng = np.random.default_rng(17)
        targets = [0.3, 0.7, 0.5]
        wiggle = rng.uniform(-0.2, 0.2, 1000)
        p_of_time = lambda t: min(1.0, max(0.0, 0.5 + wiggle[int(t * RATE) % 1000]))
        records = run_trace(cfg, targets, p_of_time)
        metrics = compute_metrics(records, cfg)
        for rec, trial in zip(records, metrics.trials):
            if not trial.acquired:
                assert trial.position_error is None
                continue
            idx = next(i for i, (tt, pp) in enumerate(rec.trace)
                       if abs(pp - rec.target) <= cfg.band)
            window = [pp for _, pp in rec.trace[idx:]]
            errs = [(pp - rec.target) * 100.0 for pp in window]
            mean = sum(errs) / len(errs)
            var = sum((e - mean) ** 2 for e in errs) / len(errs)
            assert trial.position_error == pytest.approx(mean, abs=1e-9)
            assert trial.stability_error == pytest.approx(math.sqrt(var), abs=1e-9)
            assert trial.movement_time == pytest.approx(rec.trace[idx][0] - rec.trace[0][0],
                                                        abs=1e-9)

    def test_completion_rate(self):
        cfg = TaskConfig(n_positions=5, hold_time_s=1.0)
        records = run_trace(cfg, [0.0, 1.0], lambda t: 0.0)  # only first acquired
        m = compute_metrics(records, cfg)
        assert m.completion_rate == 50.0
        assert m.trials[1].position_error is None

    def test_empty_records(self):
        with pytest.raises(EmptyRecords):
            compute_metrics([], TaskConfig())


class TestIndexOfDifficulty:
    def test_spot_check(self):
        assert index_of_difficulty(0.5, 0.05) == pytest.approx(math.log2(6.0), abs=1e-12)

    @given(st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(0.001, 0.5))
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_distance_and_band(self, d, d2, q):
        if d == d2:
            return
        lo, hi = min(d, d2), max(d, d2)
        assert index_of_difficulty(lo, q) < index_of_difficulty(hi, q)
        assert index_of_difficulty(lo, q * 0.5) > index_of_difficulty(lo, q)


def _record(target, mt, acquired=True, presented=0.0):
    entry = presented + mt if acquired else None
    return TrialRecord(target=target, presented_at=presented, first_entry_at=entry,
                       trace=((presented, target),), acquired=acquired,
                       movement_time=mt if acquired else None)


class TestFittsAnalysis:
    def test_exact_linear_fit(self):
        cfg = TaskConfig(n_positions=11, hold_time_s=10.0)
        q = cfg.band
        targets = [0.5, 1.0, 0.2]
        prev, records = 0.0, []
        for tgt in targets:
            d = abs(tgt - prev)
            prev = tgt
            mt = 0.2 + 0.5 * index_of_difficulty(d, q)
            records.append(_record(tgt, mt))
        res = fitts_analysis(records, cfg)
        assert res.slope == pytest.approx(0.5, abs=1e-9)
        assert res.intercept == pytest.approx(0.2, abs=1e-9)
        assert res.r_squared == pytest.approx(1.0, abs=1e-9)
        assert res.throughput == pytest.approx(2.0, abs=1e-9)

    def test_first_distance_measured_from_rest(self):
        cfg = TaskConfig(n_positions=11, hold_time_s=10.0)
        records = [_record(0.8, 1.0), _record(0.3, 1.0)]
        res = fitts_analysis(records, cfg)
        assert res.points[0].distance == pytest.approx(0.8)
        assert res.points[1].distance == pytest.approx(0.5)

    def test_unacquired_trials_advance_distance_but_add_no_point(self):
        cfg = TaskConfig(n_positions=11, hold_time_s=10.0)
        records = [_record(0.8, 1.0), _record(0.3, None, acquired=False), _record(0.4, 1.5)]
        res = fitts_analysis(records, cfg)
        assert len(res.points) == 2
        assert res.points[1].distance == pytest.approx(0.1)

    def test_identical_movement_times_flag_throughput_undefined(self):
        cfg = TaskConfig(n_positions=11, hold_time_s=10.0)
        records = [_record(0.5, 1.0), _record(1.0, 1.0), _record(0.1, 1.0)]
        res = fitts_analysis(records, cfg)
        assert res.slope == 0.0
        assert res.throughput is None

    def test_insufficient_distinct_difficulty(self):
        cfg = TaskConfig(n_positions=11, hold_time_s=10.0)
        with pytest.raises(InsufficientData):
            fitts_analysis([_record(0.5, 1.0)], cfg)

    def test_binning_averages_repeated_difficulties(self):
        cfg = TaskConfig(n_positions=11, hold_time_s=10.0)
        # distances: 0.5 (from rest), 0.5, 0.1 -- two trials share a bin
        records = [_record(0.5, 1.0), _record(1.0, 3.0), _record(0.9, 0.5)]
        res = fitts_analysis(records, cfg)
        assert len(res.binned) == 2
        (d_lo, mt_lo), (d_hi, mt_hi) = res.binned
        assert d_lo == pytest.approx(index_of_difficulty(0.1, cfg.band))
        assert mt_lo == pytest.approx(0.5)
        assert d_hi == pytest.approx(index_of_difficulty(0.5, cfg.band))
        assert mt_hi == pytest.approx(2.0)  # (1.0 + 3.0) / 2

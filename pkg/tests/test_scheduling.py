import math

import pytest
from hypothesis import given, settings, strategies as st

from tschsim.scheduling import (
    Action,
    CellUsageStats,
    EmsfScheduler,
    MsfConfig,
    MsfScheduler,
    PredictionState,
    SchedulingDecision,
    compute_lambda,
    emsf_decide,
    make_scheduler,
    msf_decide,
    poisson_pmf,
    predict_packet_count,
)
from tschsim.traffic import TrafficHistory


def history_of(values, beta=10) -> TrafficHistory:
    history = TrafficHistory(beta=beta)
    for v in values:
        history.record(v)
    return history


class TestComputeLambda:
    def test_constant_window(self):
        assert compute_lambda(history_of([3] * 10)) == 3.0

    def test_mixed_window(self):
        assert compute_lambda(history_of([2] * 5 + [7] * 5)) == 4.5

    def test_warmup_averages_what_exists(self):
        assert compute_lambda(history_of([0, 0, 0])) == 0.0

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            compute_lambda(TrafficHistory(beta=10))


class TestPoissonPmf:
    def test_zero_events_unit_mean(self):
        expected = math.exp(-1)
        assert abs(poisson_pmf(0, 1.0) - expected) / expected < 1e-9

    def test_degenerate_distribution(self):
        assert poisson_pmf(0, 0.0) == 1.0
        assert poisson_pmf(3, 0.0) == 0.0

    def test_two_events_mean_three(self):
        expected = 4.5 * math.exp(-3)
        assert abs(poisson_pmf(2, 3.0) - expected) / expected < 1e-9

    def test_rejects_negative_inputs(self):
        with pytest.raises(ValueError):
            poisson_pmf(-1, 1.0)
        with pytest.raises(ValueError):
            poisson_pmf(1, -1.0)

    def test_large_n_stays_finite(self):
        value = poisson_pmf(500, 480.0)
        assert 0.0 < value < 1.0

    @pytest.mark.parametrize("lam", [0.5, 1.0, 3.7, 12.0, 40.0])
    def test_normalization(self, lam):
        bound = int(lam + 10 * math.sqrt(lam) + 10)
        total = sum(poisson_pmf(n, lam) for n in range(bound + 1))
        assert total > 1 - 1e-6
        assert total <= 1 + 1e-9


def brute_force_mode(lam: float) -> int:
    bound = math.ceil(lam) + 50
    values = [poisson_pmf(n, lam) for n in range(bound + 1)]
    return max(range(bound + 1), key=lambda n: values[n])


class TestPredictPacketCount:
    def test_zero_rate(self):
        assert predict_packet_count(0.0) == 0

    def test_fractional_rate_takes_floor(self):
        assert predict_packet_count(3.5) == 3

    def test_integer_rate_tie_breaks_upward(self):
        # pmf(3) == pmf(4) exactly at lambda 4; the larger mode wins
        assert predict_packet_count(4.0) == 4

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            predict_packet_count(-0.1)

    @given(st.floats(0.0, 40.0, allow_nan=False))
    @settings(max_examples=300, deadline=None)
    def test_matches_floor_for_non_integer_rates(self, lam):
        if lam != int(lam):
            assert predict_packet_count(lam) == math.floor(lam)

    def test_agrees_with_brute_force_argmax(self):
        import random

        rng = random.Random(20260810)
        for _ in range(200):
            lam = rng.uniform(0.0, 40.0)
            assert predict_packet_count(lam) == brute_force_mode(lam)


class TestEmsfDecide:
    def test_over_allocation_deletes_difference(self):
        state = PredictionState(lam=3.0, predicted=3, allocated_cells=5)
        assert emsf_decide(state) == SchedulingDecision(Action.DELETE, 2)

    def test_under_allocation_adds_difference(self):
        state = PredictionState(lam=6.0, predicted=6, allocated_cells=2)
        assert emsf_decide(state) == SchedulingDecision(Action.ADD, 4)

    def test_exact_allocation_keeps(self):
        state = PredictionState(lam=4.0, predicted=4, allocated_cells=4)
        assert emsf_decide(state).action is Action.KEEP

    def test_pure_function(self):
        state = PredictionState(lam=2.2, predicted=2, allocated_cells=7)
        assert emsf_decide(state) == emsf_decide(state)
        assert emsf_decide(state).count == abs(2 - 7)


class TestMsfDecide:
    def test_high_usage_adds_one(self):
        stats = CellUsageStats(window_len=16, used=14, elapsed=16)
        decision = msf_decide(stats, allocated_cells=4)
        assert decision == SchedulingDecision(Action.ADD, 1)

    def test_low_usage_deletes_one(self):
        stats = CellUsageStats(window_len=16, used=2, elapsed=16)
        decision = msf_decide(stats, allocated_cells=3)
        assert decision == SchedulingDecision(Action.DELETE, 1)

    def test_mid_band_keeps(self):
        stats = CellUsageStats(window_len=16, used=8, elapsed=16)
        assert msf_decide(stats, 4).action is Action.KEEP

    def test_partial_window_keeps(self):
        stats = CellUsageStats(window_len=16, used=6, elapsed=7)
        assert msf_decide(stats, 4).action is Action.KEEP

    def test_min_cells_blocks_delete(self):
        stats = CellUsageStats(window_len=16, used=0, elapsed=16)
        assert msf_decide(stats, allocated_cells=1).action is Action.KEEP


class TestUsageStats:
    def test_tick_caps_at_window(self):
        stats = CellUsageStats(window_len=4)
        for _ in range(9):
            stats.tick(True)
        assert stats.elapsed == 4
        assert stats.used == 4

    def test_reset_clears_counts(self):
        stats = CellUsageStats(window_len=4, used=3, elapsed=4)
        stats.reset()
        assert (stats.used, stats.elapsed) == (0, 0)


class TestSchedulers:
    def test_msf_bootstraps_unprovisioned_node(self):
        scheduler = MsfScheduler(MsfConfig())
        decision = scheduler.decide(0, 0, history_of([2]), queue_len=2)
        assert decision == SchedulingDecision(Action.ADD, 1)

    def test_msf_resets_window_after_full_evaluation(self):
        scheduler = MsfScheduler(MsfConfig(window_len=4))
        for _ in range(4):
            scheduler.on_cell_elapsed(True)
        decision = scheduler.decide(5, 2, history_of([2]), 0)
        assert decision.action is Action.ADD
        assert scheduler.stats.elapsed == 0

    def test_emsf_delegates_to_msf_during_warmup(self):
        scheduler = EmsfScheduler(MsfConfig(), beta=10)
        decision = scheduler.decide(5, 0, history_of([3] * 5), 0)
        assert decision == SchedulingDecision(Action.ADD, 1)  # MSF bootstrap
        assert scheduler.last_state is None  # no prediction acted on yet

    def test_emsf_predicts_after_beta(self):
        scheduler = EmsfScheduler(MsfConfig(), beta=10, stability_frames=3)
        history = history_of([3] * 10)
        for frame in range(7, 10):  # warm-up calls build stability
            scheduler.decide(frame, 0, history, 0)
        decision = scheduler.decide(10, 0, history, 0)
        assert decision == SchedulingDecision(Action.ADD, 3)
        assert scheduler.last_state.lam == 3.0

    def test_emsf_waits_for_stable_prediction(self):
        scheduler = EmsfScheduler(MsfConfig(), beta=10, stability_frames=3)
        history = history_of([3] * 10)
        scheduler.decide(9, 3, history, 0)  # prediction 3, stable for 1
        for _ in range(3):  # burst pushes the window mean to 4.8
            history.record(9)
        decision = scheduler.decide(10, 3, history, 0)
        assert decision.action is Action.KEEP  # prediction 4 not yet stable
        scheduler.decide(11, 3, history, 0)
        decision = scheduler.decide(12, 3, history, 0)
        assert decision == SchedulingDecision(Action.ADD, 1)

    def test_make_scheduler_rejects_unknown_name(self):
        with pytest.raises(ValueError):
            make_scheduler("tasa", MsfConfig(), 10, 3)

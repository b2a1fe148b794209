"""Threshold solvers against hand-worked cases and exhaustive enumeration."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairord.core import (
    CostMatrix,
    DataError,
    FairnessNotion,
    GuardError,
    Thresholds,
    predictions_from_scores,
)
from fairord.thresholds import (
    ThresholdObjectiveConfig,
    brute_force_thresholds,
    cost_only_dp,
    exact_dp,
    local_search,
    objective,
)
from fairord.thresholds import (
    _feasible_cuts,
    _predictions_for_positions,
    _theta_from_positions,
)


def _instance(rng, max_n=8, k_pool=(2, 3, 4)):
    n = int(rng.integers(3, max_n + 1))
    k = int(rng.choice(k_pool))
    scores = rng.integers(-4, 5, size=n).astype(float)
    labels = rng.integers(1, k + 1, size=n)
    attrs = rng.integers(0, 2, size=n)
    attrs[0], attrs[-1] = 0, 1
    return scores, labels, attrs, k


def _compare_with_enumeration(scores, labels, attrs, cfg):
    """Exact solver and enumeration must refuse together or agree exactly."""
    try:
        exact = exact_dp(scores, labels, attrs, cfg)
    except DataError:
        with pytest.raises(DataError):
            brute_force_thresholds(scores, labels, attrs, cfg)
        return None
    brute = brute_force_thresholds(scores, labels, attrs, cfg)
    assert exact.objective == brute.objective
    return exact, brute


class TestCostOnlyDP:
    def test_perfectly_separable_scores_cost_zero(self):
        sol = cost_only_dp([1.0, 2.0, 3.0, 4.0], [1, 2, 3, 4], CostMatrix.absolute(4))
        assert sol.cost == 0.0
        assert sol.positions == (1, 2, 3)
        preds = predictions_from_scores([1.0, 2.0, 3.0, 4.0], sol.thresholds)
        assert preds.tolist() == [1, 2, 3, 4]

    def test_tied_scores_get_one_bin(self):
        sol = cost_only_dp([5.0, 5.0, 5.0], [1, 1, 3], CostMatrix.absolute(3))
        assert sol.cost == pytest.approx(2 / 3)
        preds = predictions_from_scores([5.0, 5.0, 5.0], sol.thresholds)
        assert len(set(preds.tolist())) == 1

    @pytest.mark.parametrize("menu", [CostMatrix.absolute, CostMatrix.binary,
                                      CostMatrix.asymmetric])
    def test_matches_enumeration(self, menu):
        rng = np.random.default_rng(4021)
        for _ in range(25):
            scores, labels, attrs, k = _instance(rng)
            cfg = ThresholdObjectiveConfig(0.0, menu(k), FairnessNotion.PAIRWISE_DP)
            sol = cost_only_dp(scores, labels, cfg.cost_matrix)
            brute = brute_force_thresholds(scores, labels, attrs, cfg)
            assert sol.cost == brute.objective

    def test_positions_respect_ties(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            scores, labels, _, k = _instance(rng)
            sol = cost_only_dp(scores, labels, CostMatrix.absolute(k))
            ok = _feasible_cuts(np.sort(scores))
            assert all(ok[p] for p in sol.positions)
            assert list(sol.positions) == sorted(sol.positions)

    def test_cost_agrees_with_direct_evaluation(self):
        rng = np.random.default_rng(913)
        for _ in range(20):
            scores, labels, attrs, k = _instance(rng)
            cfg = ThresholdObjectiveConfig(0.0, CostMatrix.absolute(k))
            sol = cost_only_dp(scores, labels, cfg.cost_matrix)
            direct = objective(scores, labels, attrs, sol.thresholds, cfg)
            assert sol.cost == direct.cost


class TestExactParity:
    def test_separable_and_balanced_groups_reach_zero(self):
        cfg = ThresholdObjectiveConfig(1.0, CostMatrix.absolute(2))
        sol = exact_dp([1.0, 2.0, 3.0, 4.0], [1, 1, 2, 2], [0, 1, 0, 1], cfg)
        assert sol.objective == 0.0
        assert sol.cost == 0.0
        assert sol.violation == 0.0

    def test_group_aligned_labels_force_a_tradeoff(self):
        scores = [1.0, 2.0, 3.0, 4.0]
        labels = [1, 1, 2, 2]
        attrs = [0, 0, 1, 1]
        strict = exact_dp(scores, labels, attrs,
                          ThresholdObjectiveConfig(1.0, CostMatrix.absolute(2)))
        assert strict.objective == 0.5
        assert strict.violation == 0.0
        mild = exact_dp(scores, labels, attrs,
                        ThresholdObjectiveConfig(0.3, CostMatrix.absolute(2)))
        assert mild.objective == pytest.approx(0.3)
        assert mild.cost == 0.0
        assert mild.violation == 1.0

    @pytest.mark.parametrize("lam", [0.0, 0.7, 2.0])
    def test_matches_enumeration(self, lam):
        rng = np.random.default_rng(515)
        for _ in range(30):
            scores, labels, attrs, k = _instance(rng)
            cfg = ThresholdObjectiveConfig(lam, CostMatrix.absolute(k))
            _compare_with_enumeration(scores, labels, attrs, cfg)

    def test_reported_numbers_match_direct_evaluation(self):
        rng = np.random.default_rng(99)
        for _ in range(15):
            scores, labels, attrs, k = _instance(rng)
            cfg = ThresholdObjectiveConfig(0.7, CostMatrix.binary(k))
            sol = exact_dp(scores, labels, attrs, cfg)
            direct = objective(scores, labels, attrs, sol.thresholds, cfg)
            assert sol.objective == direct.value
            assert sol.cost == direct.cost
            assert sol.violation == direct.violation

    def test_size_guard(self):
        n = 41
        cfg = ThresholdObjectiveConfig(1.0, CostMatrix.absolute(3))
        with pytest.raises(GuardError):
            exact_dp(np.arange(n, dtype=float), np.ones(n, dtype=int),
                     np.arange(n) % 2, cfg)

    def test_requires_two_groups(self):
        cfg = ThresholdObjectiveConfig(1.0, CostMatrix.absolute(2))
        with pytest.raises(DataError):
            exact_dp([1.0, 2.0], [1, 2], [0, 0], cfg)
        with pytest.raises(DataError):
            exact_dp([1.0, 2.0, 3.0], [1, 2, 1], [0, 1, 2], cfg)


class TestExactOrdered:
    def test_hand_case_prefers_constant_at_high_lam(self):
        scores = [1.0, 2.0, 3.0, 4.0]
        labels = [1, 2, 1, 2]
        attrs = [0, 0, 1, 1]
        cfg = ThresholdObjectiveConfig(1.0, CostMatrix.absolute(2),
                                       FairnessNotion.PAIRWISE_EO)
        sol = exact_dp(scores, labels, attrs, cfg)
        assert sol.objective == 0.5
        assert sol.violation == 0.0
        mild = exact_dp(scores, labels, attrs,
                        ThresholdObjectiveConfig(0.1, CostMatrix.absolute(2),
                                                 FairnessNotion.PAIRWISE_EO))
        assert mild.objective == pytest.approx(0.35)
        assert mild.cost == 0.25
        assert mild.violation == 1.0

    @pytest.mark.parametrize("lam", [0.0, 0.7, 2.0])
    def test_matches_enumeration(self, lam):
        rng = np.random.default_rng(71)
        for _ in range(30):
            scores, labels, attrs, k = _instance(rng)
            cfg = ThresholdObjectiveConfig(lam, CostMatrix.absolute(k),
                                           FairnessNotion.PAIRWISE_EO)
            _compare_with_enumeration(scores, labels, attrs, cfg)

    def test_undefined_direction_refused(self):
        # group 1 never outranks group 0, so one conditioning event is empty
        cfg = ThresholdObjectiveConfig(1.0, CostMatrix.absolute(3),
                                       FairnessNotion.PAIRWISE_EO)
        with pytest.raises(DataError):
            exact_dp([1.0, 2.0, 3.0], [3, 3, 1], [0, 0, 1], cfg)

    def test_size_guard(self):
        n = 26
        cfg = ThresholdObjectiveConfig(1.0, CostMatrix.absolute(2),
                                       FairnessNotion.PAIRWISE_EO)
        with pytest.raises(GuardError):
            exact_dp(np.arange(n, dtype=float), 1 + np.arange(n) % 2,
                     np.arange(n) % 2, cfg)


class TestLocalSearch:
    def test_never_beats_and_usually_matches_enumeration(self):
        rng = np.random.default_rng(2024)
        total = matched = 0
        for _ in range(24):
            scores, labels, attrs, k = _instance(rng)
            for lam in (0.0, 0.7):
                cfg = ThresholdObjectiveConfig(lam, CostMatrix.absolute(k),
                                               restarts=6, seed=3)
                brute = brute_force_thresholds(scores, labels, attrs, cfg)
                found = local_search(scores, labels, attrs, cfg)
                assert found.objective >= brute.objective
                total += 1
                matched += found.objective == brute.objective
        assert matched / total >= 0.7

    def test_label_conditioned_variant_is_sound(self):
        rng = np.random.default_rng(88)
        checked = 0
        for _ in range(20):
            scores, labels, attrs, k = _instance(rng)
            cfg = ThresholdObjectiveConfig(0.7, CostMatrix.absolute(k),
                                           FairnessNotion.PAIRWISE_EO,
                                           restarts=6, seed=3)
            try:
                brute = brute_force_thresholds(scores, labels, attrs, cfg)
            except DataError:
                with pytest.raises(DataError):
                    local_search(scores, labels, attrs, cfg)
                continue
            found = local_search(scores, labels, attrs, cfg)
            assert found.objective >= brute.objective
            checked += 1
        assert checked >= 5

    def test_incremental_tables_survive_rebuild_checks(self):
        rng = np.random.default_rng(31)
        for notion in (FairnessNotion.PAIRWISE_DP, FairnessNotion.PAIRWISE_EO):
            for _ in range(8):
                scores, labels, attrs, k = _instance(rng)
                cfg = ThresholdObjectiveConfig(0.5, CostMatrix.asymmetric(k), notion,
                                               restarts=3, seed=1)
                try:
                    local_search(scores, labels, attrs, cfg, check_invariants=True)
                except DataError:
                    continue

    def test_trace_objectives_strictly_decrease(self):
        rng = np.random.default_rng(5150)
        seen_moves = 0
        for _ in range(12):
            scores, labels, attrs, k = _instance(rng)
            cfg = ThresholdObjectiveConfig(0.7, CostMatrix.absolute(k),
                                           restarts=4, seed=9)
            found = local_search(scores, labels, attrs, cfg, collect_trace=True)
            for outcome in found.outcomes:
                assert outcome.converged
                objs = [outcome.initial_objective] + [t.objective for t in outcome.trace]
                assert all(b < a for a, b in zip(objs, objs[1:]))
                seen_moves += len(outcome.trace)
        assert seen_moves > 0

    def test_reported_numbers_match_direct_evaluation(self):
        rng = np.random.default_rng(626)
        for _ in range(10):
            scores, labels, attrs, k = _instance(rng)
            cfg = ThresholdObjectiveConfig(1.3, CostMatrix.absolute(k),
                                           restarts=3, seed=0)
            found = local_search(scores, labels, attrs, cfg)
            direct = objective(scores, labels, attrs, found.thresholds, cfg)
            assert found.objective == direct.value
            assert found.cost == direct.cost
            assert found.violation == direct.violation

    def test_deterministic_for_a_seed(self):
        rng = np.random.default_rng(8)
        scores, labels, attrs, k = _instance(rng, max_n=12)
        cfg = ThresholdObjectiveConfig(0.9, CostMatrix.absolute(k),
                                       restarts=5, seed=42)
        a = local_search(scores, labels, attrs, cfg, collect_trace=True)
        b = local_search(scores, labels, attrs, cfg, collect_trace=True)
        assert a.positions == b.positions
        assert a.objective == b.objective
        assert a.outcomes == b.outcomes

    def test_cost_only_seed_policy(self):
        rng = np.random.default_rng(14)
        scores, labels, attrs, k = _instance(rng, max_n=10)
        cfg = ThresholdObjectiveConfig(0.4, CostMatrix.absolute(k),
                                       restarts=3, seed=5,
                                       init_policy="cost_only_dp")
        seeded = local_search(scores, labels, attrs, cfg)
        dp = cost_only_dp(scores, labels, cfg.cost_matrix)
        start = objective(scores, labels, attrs, dp.thresholds, cfg)
        assert seeded.outcomes[0].initial_objective == start.value

    def test_iteration_cap(self):
        rng = np.random.default_rng(3)
        scores, labels, attrs, k = _instance(rng, max_n=12)
        cfg = ThresholdObjectiveConfig(0.7, CostMatrix.absolute(k),
                                       restarts=4, seed=7, max_iterations=1)
        capped = local_search(scores, labels, attrs, cfg)
        assert all(o.moves <= 1 for o in capped.outcomes)

    def test_single_group_reduces_to_cost(self):
        cfg = ThresholdObjectiveConfig(5.0, CostMatrix.absolute(3), restarts=2)
        found = local_search([1.0, 2.0, 3.0], [1, 2, 3], [0, 0, 0], cfg)
        assert found.violation == 0.0
        assert found.objective == found.cost

    def test_rejects_bad_arguments(self):
        with pytest.raises(DataError):
            ThresholdObjectiveConfig(1.0, CostMatrix.absolute(2), restarts=0)
        with pytest.raises(DataError):
            ThresholdObjectiveConfig(1.0, CostMatrix.absolute(2), init_policy="warm")


class TestObjectiveConfig:
    def test_rejects_negative_or_nonpairwise(self):
        with pytest.raises(DataError):
            ThresholdObjectiveConfig(-0.1, CostMatrix.absolute(2))
        with pytest.raises(DataError):
            ThresholdObjectiveConfig(1.0, CostMatrix.absolute(2),
                                     FairnessNotion.STANDARD_DP)


class TestPositionPlumbing:
    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_thresholds_reproduce_cut_predictions(self, data):
        raw = data.draw(st.lists(st.integers(-6, 6), min_size=1, max_size=12))
        s = np.sort(np.asarray(raw, dtype=float))
        n = len(s)
        feasible = np.flatnonzero(_feasible_cuts(s)).tolist()
        m = data.draw(st.integers(1, 4))
        positions = sorted(data.draw(
            st.lists(st.sampled_from(feasible), min_size=m, max_size=m)))
        theta = _theta_from_positions(s, positions)
        assert np.all(np.diff(theta) >= 0)
        via_theta = predictions_from_scores(s, Thresholds(theta))
        via_cuts = _predictions_for_positions(positions, n)
        assert np.array_equal(via_theta, via_cuts)

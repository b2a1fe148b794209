"""Two-step pipeline, sweep refinement, and baseline behavior."""
import numpy as np
import pytest

from fairord.core import DataError, Dataset, FairnessNotion, ThresholdModel
from fairord import pipeline
from fairord.pipeline import (TradeoffConfig, constant_median_baseline,
                              evaluate_model, fair_thresholds_for_scorer,
                              fit_pom, frontier_rows, lambda_from_prime,
                              mixture_eval, sweep, train_two_step)
from fairord.reduction import FairClassifierConfig

from helpers import random_dataset


def small_template():
    return FairClassifierConfig(mu=0.0, grid_size=9, reg_strength=1e-3,
                                max_iterations=400)


def biased_dataset(seed, n=60):
    """Group 0 skews to high labels; one feature leaks the group."""
    rng = np.random.default_rng(seed)
    attrs = np.arange(n) % 2
    labels = np.where(attrs == 0, rng.integers(2, 4, size=n),
                      rng.integers(1, 3, size=n))
    signal = labels + rng.normal(0, 0.6, size=n)
    leak = 2.0 * attrs + rng.normal(0, 0.3, size=n)
    return Dataset(np.column_stack([signal, leak]), labels, attrs, num_classes=3)


class TestLambdaMapping:
    def test_known_values(self):
        assert lambda_from_prime(0.5, 4) == 4.0
        assert lambda_from_prime(0.0, 7) == 0.0
        assert lambda_from_prime(0.9, 3) == pytest.approx(27.0)

    def test_domain(self):
        with pytest.raises(DataError):
            lambda_from_prime(1.0, 3)
        with pytest.raises(DataError):
            lambda_from_prime(-0.1, 3)


class TestTwoStep:
    def test_unconstrained_run_beats_constant_median_on_train(self):
        rng = np.random.default_rng(10)
        cfg = TradeoffConfig(classifier=small_template(), restarts=2, seed=0)
        for _ in range(20):
            ds = random_dataset(rng, n=int(rng.integers(12, 24)), k=3, groups=2)
            _, point = train_two_step(ds, FairnessNotion.PAIRWISE_DP, 0.0, cfg)
            median_cost, _ = evaluate_model(constant_median_baseline(ds), ds,
                                            FairnessNotion.PAIRWISE_DP)
            assert point.train_cost <= median_cost

    def test_fairness_knob_reduces_test_violation(self):
        train, test = biased_dataset(1), biased_dataset(2)
        cfg = TradeoffConfig(classifier=small_template(), restarts=3, seed=5)
        _, loose = train_two_step(train, FairnessNotion.PAIRWISE_DP, 0.0, cfg,
                                  test=test)
        _, tight = train_two_step(train, FairnessNotion.PAIRWISE_DP, 0.8, cfg,
                                  test=test)
        assert tight.test_violation < loose.test_violation
        assert tight.test_cost >= loose.test_cost

    def test_decoupled_lambda_prime(self):
        train = biased_dataset(3)
        cfg = TradeoffConfig(classifier=small_template(), restarts=2,
                             lambda_prime=0.0, seed=1)
        model, point = train_two_step(train, FairnessNotion.PAIRWISE_DP, 0.8, cfg)
        assert model.metadata["lambda"] == 0.0
        assert model.metadata["mu_lambda"] == 0.8
        median_cost, _ = evaluate_model(constant_median_baseline(train), train,
                                        FairnessNotion.PAIRWISE_DP)
        assert point.train_cost <= median_cost

    def test_rejects_bad_inputs(self):
        ds = biased_dataset(4, n=20)
        cfg = TradeoffConfig(classifier=small_template(), restarts=1)
        with pytest.raises(DataError):
            train_two_step(ds, FairnessNotion.PAIRWISE_DP, 1.0, cfg)
        with pytest.raises(DataError):
            train_two_step(ds, FairnessNotion.STANDARD_DP, 0.5, cfg)

    def test_rows_exclude_timings(self):
        train, test = biased_dataset(5, n=24), biased_dataset(6, n=24)
        cfg = TradeoffConfig(classifier=small_template(), restarts=1, seed=2)
        _, point = train_two_step(train, FairnessNotion.PAIRWISE_DP, 0.3, cfg,
                                  test=test)
        rows = point.to_rows()
        assert [r["split"] for r in rows] == ["train", "test"]
        for row in rows:
            assert set(row) == {"mu_lambda", "split", "cost", "violation",
                                "scorer_gap", "seed"}
        assert point.elapsed > 0

    def test_serialized_model_matches_in_memory(self, tmp_path):
        train, test = biased_dataset(7, n=30), biased_dataset(8, n=30)
        cfg = TradeoffConfig(classifier=small_template(), restarts=2, seed=3)
        model, _ = train_two_step(train, FairnessNotion.PAIRWISE_DP, 0.4, cfg)
        path = tmp_path / "model.json"
        model.save(path)
        loaded = ThresholdModel.load(path)
        raw = test.features
        assert np.array_equal(loaded.scores(raw), model.scorer.score(model.normalize(raw)))
        assert np.array_equal(loaded.predictions(raw), model.predictions(raw))


class TestSweep:
    def test_plain_grid_one_point_per_value(self):
        train, test = biased_dataset(9, n=30), biased_dataset(10, n=30)
        cfg = TradeoffConfig(mu_lambda_grid=(0.0, 0.5), classifier=small_template(),
                             restarts=1, seed=4)
        points = sweep(train, test, FairnessNotion.PAIRWISE_DP, cfg)
        assert [p.mu_lambda for p in points] == [0.0, 0.5]

    def test_no_refinement_when_jumps_are_small(self):
        train, test = biased_dataset(9, n=30), biased_dataset(10, n=30)
        cfg = TradeoffConfig(mu_lambda_grid=(0.0, 0.5), adaptive_refine=True,
                             refine_gap=1.5, refine_budget=3,
                             classifier=small_template(), restarts=1, seed=4)
        points = sweep(train, test, FairnessNotion.PAIRWISE_DP, cfg)
        assert len(points) == 2

    def test_refinement_bisects_large_jumps(self):
        train, test = biased_dataset(1), biased_dataset(2)
        cfg = TradeoffConfig(mu_lambda_grid=(0.0, 0.8), adaptive_refine=True,
                             refine_gap=0.3, refine_budget=2,
                             classifier=small_template(), restarts=3, seed=5)
        points = sweep(train, test, FairnessNotion.PAIRWISE_DP, cfg)
        mus = [p.mu_lambda for p in points]
        assert mus == sorted(mus)
        assert 2 < len(points) <= 4
        assert any(0.0 < m < 0.8 for m in mus)

    def test_sweep_is_deterministic(self):
        train, test = biased_dataset(1, n=40), biased_dataset(2, n=40)
        cfg = TradeoffConfig(mu_lambda_grid=(0.0, 0.6), adaptive_refine=True,
                             refine_gap=0.2, refine_budget=1,
                             classifier=small_template(), restarts=2, seed=6)
        first = frontier_rows(sweep(train, test, FairnessNotion.PAIRWISE_DP, cfg))
        second = frontier_rows(sweep(train, test, FairnessNotion.PAIRWISE_DP, cfg))
        assert first == second

    def test_grid_validation(self):
        with pytest.raises(DataError):
            TradeoffConfig(mu_lambda_grid=())
        with pytest.raises(DataError):
            TradeoffConfig(mu_lambda_grid=(0.0, 1.0))
        with pytest.raises(DataError):
            TradeoffConfig(refine_gap=0.0)


def _pom_sample(rng, n, k, w_true, theta_true):
    X = rng.normal(size=(n, len(w_true)))
    s = X @ w_true
    cum = 1.0 / (1.0 + np.exp(-(theta_true[None, :] - s[:, None])))
    y = 1 + (rng.random(n)[:, None] > cum).sum(axis=1)
    return Dataset(X, y, rng.integers(0, 2, size=n), num_classes=k)


class TestPom:
    def test_gradient_matches_central_differences(self):
        # draws where some class mass nearly underflows are rejected: there
        # the central difference itself is ill-conditioned, not the gradient
        from scipy.special import expit
        rng = np.random.default_rng(3)
        for k in (2, 3, 5):
            done = 0
            while done < 6:
                X = rng.normal(size=(25, 2))
                y = rng.integers(1, k + 1, size=25)
                y[:k] = np.arange(1, k + 1)
                params = 0.5 * rng.normal(size=2 + k - 1)
                theta = pipeline._pom_theta(params, k)
                edges = np.concatenate([[-np.inf], theta, [np.inf]])
                scores = X @ params[:2]
                mass = expit(edges[y] - scores) - expit(edges[y - 1] - scores)
                if mass.min() < 1e-4:
                    continue
                done += 1
                _, grad = pipeline._pom_nll_grad(params, X, y, k)
                num = np.empty_like(params)
                h = 1e-6
                for i in range(len(params)):
                    bump = np.zeros_like(params)
                    bump[i] = h
                    up, _ = pipeline._pom_nll_grad(params + bump, X, y, k)
                    dn, _ = pipeline._pom_nll_grad(params - bump, X, y, k)
                    num[i] = (up - dn) / (2 * h)
                denom = max(float(np.linalg.norm(grad)), 1e-12)
                assert float(np.linalg.norm(grad - num)) / denom <= 1e-5

    def test_separable_data_reaches_zero_cost(self):
        labels = np.repeat([1, 2, 3], 3)
        ds = Dataset(np.arange(9, dtype=float)[:, None], labels,
                     np.zeros(9, dtype=int), num_classes=3)
        model, report = fit_pom(ds, max_iterations=2000, collect_trace=True)
        assert np.array_equal(model.predictions(ds.features), labels)
        assert np.all(np.diff(report.trace) >= 0)

    def test_recovers_generating_direction(self):
        rng = np.random.default_rng(7)
        w_true = np.array([1.5, -2.0, 0.7])
        ds = _pom_sample(rng, 2000, 4, w_true, np.array([-1.0, 0.3, 1.8]))
        model, report = fit_pom(ds, max_iterations=400)
        assert report.converged
        raw_dir = model.scorer.weights / model.feature_stds
        cos = float(raw_dir @ w_true
                    / (np.linalg.norm(raw_dir) * np.linalg.norm(w_true)))
        assert cos > 0.95

    def test_iteration_starved_fit_is_flagged(self):
        rng = np.random.default_rng(8)
        ds = _pom_sample(rng, 200, 3, np.array([1.0, -1.0]), np.array([-0.5, 0.5]))
        _, report = fit_pom(ds, max_iterations=2)
        assert not report.converged

    def test_never_modal_class_collapses_its_cut(self):
        # the middle class of theta = (0, 0.001, 5) has at most ~0.00025 mass
        # anywhere, so prediction jumps from 1 straight to 3
        cuts = pipeline._pom_cuts(np.array([0.0, 0.001, 5.0]))
        assert cuts[0] == cuts[1]
        assert np.all(np.diff(cuts) >= 0)
        from fairord.core import Thresholds, predictions_from_scores
        grid = np.linspace(-10, 15, 4001)
        preds = predictions_from_scores(grid, Thresholds(cuts))
        assert 2 not in set(int(v) for v in preds)


class TestMedianBaseline:
    def test_lower_median_convention(self):
        odd = Dataset(np.zeros((3, 1)), np.array([1, 2, 3]),
                      np.array([0, 1, 0]), num_classes=3)
        even = Dataset(np.zeros((4, 1)), np.array([1, 2, 3, 4]),
                       np.array([0, 1, 0, 1]), num_classes=4)
        assert set(constant_median_baseline(odd).predictions(odd.features)) == {2}
        assert set(constant_median_baseline(even).predictions(even.features)) == {2}

    def test_constant_predictor_has_zero_violation(self):
        rng = np.random.default_rng(12)
        for _ in range(5):
            ds = random_dataset(rng, n=12, k=4, groups=2)
            model = constant_median_baseline(ds)
            cost, viol = evaluate_model(model, ds, FairnessNotion.PAIRWISE_DP)
            med = int(np.sort(ds.labels)[(ds.n - 1) // 2])
            assert viol == 0.0
            assert cost == pytest.approx(np.mean(np.abs(ds.labels - med)))


class TestMixture:
    def test_endpoints_are_deterministic(self):
        train, test = biased_dataset(1, n=40), biased_dataset(2, n=40)
        cfg = TradeoffConfig(classifier=small_template(), restarts=2, seed=5)
        base, _ = train_two_step(train, FairnessNotion.PAIRWISE_DP, 0.0, cfg)
        points = mixture_eval(base, train, test, (0.0, 1.0), trials=5, seed=11)
        base_cost, base_viol = evaluate_model(base, test, FairnessNotion.PAIRWISE_DP)
        assert points[0].cost == base_cost
        assert points[0].violation == base_viol
        assert points[1].violation == 0.0
        med = int(np.sort(train.labels)[(train.n - 1) // 2])
        assert points[1].cost == pytest.approx(np.mean(np.abs(test.labels - med)))

    def test_violation_curve_is_nonlinear_in_p(self):
        train, test = biased_dataset(1), biased_dataset(2)
        cfg = TradeoffConfig(classifier=small_template(), restarts=3, seed=5)
        base, _ = train_two_step(train, FairnessNotion.PAIRWISE_DP, 0.0, cfg)
        points = mixture_eval(base, train, test, (0.0, 0.5, 1.0), trials=60,
                              seed=11)
        linear = 0.5 * (points[0].violation + points[2].violation)
        assert abs(points[1].violation - linear) > 0.02

    def test_trials_are_seeded_per_point(self):
        train, test = biased_dataset(3, n=30), biased_dataset(4, n=30)
        base = ThresholdModel.plain([1.0, 0.0], [2.0, 3.0])
        first = mixture_eval(base, train, test, (0.25, 0.75), trials=8, seed=2)
        second = mixture_eval(base, train, test, (0.25, 0.75), trials=8, seed=2)
        assert first == second
        shifted = mixture_eval(base, train, test, (0.25, 0.75), trials=8, seed=3)
        assert first != shifted

    def test_probability_domain(self):
        train, test = biased_dataset(3, n=20), biased_dataset(4, n=20)
        base = constant_median_baseline(train)
        with pytest.raises(DataError):
            mixture_eval(base, train, test, (1.5,), trials=2)
        with pytest.raises(DataError):
            mixture_eval(base, train, test, (0.5,), trials=0)


class TestRethresholding:
    def test_fair_cuts_on_a_fixed_scorer(self):
        train = biased_dataset(1)
        pom_model, _ = fit_pom(train)
        _, pom_viol = evaluate_model(pom_model, train, FairnessNotion.PAIRWISE_DP)
        refit = fair_thresholds_for_scorer(pom_model, train,
                                           FairnessNotion.PAIRWISE_DP, lam=6.0,
                                           restarts=4, seed=0)
        _, refit_viol = evaluate_model(refit, train, FairnessNotion.PAIRWISE_DP)
        assert np.array_equal(refit.scorer.weights, pom_model.scorer.weights)
        assert np.array_equal(refit.feature_means, pom_model.feature_means)
        assert refit.metadata["rethresholded"] is True
        assert refit_viol < pom_viol

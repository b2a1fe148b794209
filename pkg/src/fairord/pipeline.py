"""Two-step training, trade-off sweeps, and reference baselines.

The two-step recipe: standardize features on the training split, learn a
scoring function on label-distinct pairs, then place thresholds on the
training scores by penalized search.  A single knob mu_lambda in [0, 1)
drives both stages; the threshold penalty uses lambda = k * l / (1 - l),
so the knob sweeps the whole trade-off curve.

Baselines: a proportional-odds model fit by maximum likelihood, the
constant lower-median predictor, and randomized mixtures of a base model
with the median label.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .core import (CostMatrix, DataError, Dataset, FairnessNotion, LinearScorer,
                   ThresholdModel, Thresholds)
from .metrics import expected_cost, pairwise_dp_viol, pairwise_eo_viol
from .reduction import FairClassifierConfig, build_pairwise_dataset, train_fair_scorer
from .thresholds import ThresholdObjectiveConfig, local_search

__all__ = [
    "TradeoffConfig",
    "FrontierPoint",
    "MixturePoint",
    "PomReport",
    "lambda_from_prime",
    "evaluate_model",
    "train_two_step",
    "sweep",
    "fit_pom",
    "constant_median_baseline",
    "mixture_eval",
    "fair_thresholds_for_scorer",
    "frontier_rows",
]

_PAIRWISE = (FairnessNotion.PAIRWISE_DP, FairnessNotion.PAIRWISE_EO)


def lambda_from_prime(lambda_prime: float, k: int) -> float:
    """Undo the bounded reparameterization: l in [0,1) maps to k*l/(1-l)."""
    if not 0 <= lambda_prime < 1:
        raise DataError("lambda_prime must lie in [0, 1)")
    return k * lambda_prime / (1.0 - lambda_prime)


@dataclass(frozen=True)
class TradeoffConfig:
    """Grid and stage knobs for the trade-off sweep.

    lambda_prime=None couples the threshold penalty to mu_lambda; a fixed
    value decouples the stages (0.0 gives the scorer-fairness-only variant).
    classifier is a template whose mu and seed are overridden per point.
    """

    mu_lambda_grid: tuple[float, ...] = tuple(i / 10 for i in range(10))
    adaptive_refine: bool = False
    refine_gap: float = 0.2
    refine_budget: int = 5
    lambda_prime: float | None = None
    cost_matrix: CostMatrix | None = None
    classifier: FairClassifierConfig | None = None
    restarts: int = 10
    init_policy: str = "cost_only_dp"
    seed: int = 0

    def __post_init__(self):
        grid = tuple(float(v) for v in self.mu_lambda_grid)
        if not grid:
            raise DataError("mu_lambda_grid must be non-empty")
        if any(not 0 <= v < 1 for v in grid):
            raise DataError("mu_lambda values must lie in [0, 1)")
        if self.refine_gap <= 0:
            raise DataError("refine_gap must be positive")
        if self.refine_budget < 0:
            raise DataError("refine_budget must be non-negative")
        if self.lambda_prime is not None and not 0 <= self.lambda_prime < 1:
            raise DataError("lambda_prime must lie in [0, 1)")
        object.__setattr__(self, "mu_lambda_grid", grid)


@dataclass(frozen=True)
class FrontierPoint:
    """One sweep point; elapsed is provenance only and never serialized."""

    mu_lambda: float
    model: ThresholdModel
    train_cost: float
    train_violation: float
    test_cost: float | None
    test_violation: float | None
    scorer_gap: float
    seed: int
    elapsed: float = 0.0

    def to_rows(self) -> list[dict]:
        rows = [{"mu_lambda": self.mu_lambda, "split": "train",
                 "cost": self.train_cost, "violation": self.train_violation,
                 "scorer_gap": self.scorer_gap, "seed": self.seed}]
        if self.test_cost is not None:
            rows.append({"mu_lambda": self.mu_lambda, "split": "test",
                         "cost": self.test_cost, "violation": self.test_violation,
                         "scorer_gap": self.scorer_gap, "seed": self.seed})
        return rows


def frontier_rows(points) -> list[dict]:
    rows = []
    for point in points:
        rows.extend(point.to_rows())
    return rows


@dataclass(frozen=True)
class MixturePoint:
    p: float
    cost: float
    violation: float

    def to_row(self) -> dict:
        return {"p": self.p, "cost": self.cost, "violation": self.violation}


def _violation(notion: FairnessNotion, dataset: Dataset, preds) -> float:
    if notion is FairnessNotion.PAIRWISE_DP:
        report = pairwise_dp_viol(dataset.attrs, preds,
                                  num_classes=dataset.num_classes,
                                  num_groups=dataset.num_groups)
    elif notion is FairnessNotion.PAIRWISE_EO:
        report = pairwise_eo_viol(dataset.attrs, dataset.labels, preds,
                                  num_classes=dataset.num_classes,
                                  num_groups=dataset.num_groups)
    else:
        raise DataError(f"evaluation targets the pairwise criteria, not {notion.value}")
    return report.violation


def evaluate_model(model: ThresholdModel, dataset: Dataset, notion: FairnessNotion,
                   cost_matrix: CostMatrix | None = None) -> tuple[float, float]:
    """Expected cost and pairwise violation of the model on one split."""
    cost_matrix = cost_matrix or CostMatrix.absolute(dataset.num_classes)
    preds = model.predictions(dataset.features)
    return (expected_cost(dataset.labels, preds, cost_matrix),
            _violation(notion, dataset, preds))


def _standardize(train: Dataset):
    means = train.features.mean(axis=0)
    stds = train.features.std(axis=0)
    stds = np.where(stds == 0, 1.0, stds)
    return means, stds, (train.features - means) / stds


def train_two_step(train: Dataset, notion: FairnessNotion, mu_lambda: float,
                   config: TradeoffConfig | None = None, seed: int | None = None,
                   test: Dataset | None = None) -> tuple[ThresholdModel, FrontierPoint]:
    """Fair scorer on pairs, then penalized thresholds on the train scores."""
    if notion not in _PAIRWISE:
        raise DataError(f"the two-step trainer targets the pairwise criteria, "
                        f"not {notion.value}")
    if not 0 <= mu_lambda < 1:
        raise DataError("mu_lambda must lie in [0, 1)")
    config = config if config is not None else TradeoffConfig()
    seed = config.seed if seed is None else seed
    k = train.num_classes
    started = time.perf_counter()

    means, stds, normed = _standardize(train)
    normed_train = Dataset(features=normed, labels=train.labels, attrs=train.attrs,
                           num_classes=k, attribute_names=train.attribute_names)
    template = config.classifier if config.classifier is not None \
        else FairClassifierConfig(mu=0.0)
    classifier_config = replace(template, mu=mu_lambda, seed=seed)
    pairs = build_pairwise_dataset(normed_train, cap=classifier_config.pair_cap,
                                   seed=seed)
    scorer, training_report = train_fair_scorer(pairs, classifier_config, notion)
    scorer_gap = training_report.grid_points[training_report.winner_index].gap

    lambda_prime = config.lambda_prime if config.lambda_prime is not None else mu_lambda
    lam = lambda_from_prime(lambda_prime, k)
    cost_matrix = config.cost_matrix or CostMatrix.absolute(k)
    search_config = ThresholdObjectiveConfig(lam=lam, cost_matrix=cost_matrix,
                                             notion=notion, restarts=config.restarts,
                                             init_policy=config.init_policy, seed=seed)
    search = local_search(scorer.score(normed), train.labels, train.attrs,
                          search_config)

    model = ThresholdModel(scorer=scorer, thresholds=search.thresholds,
                           feature_means=means, feature_stds=stds, notion=notion,
                           metadata={"mu_lambda": mu_lambda, "lambda": lam,
                                     "seed": seed})
    train_cost, train_violation = evaluate_model(model, train, notion, cost_matrix)
    test_cost = test_violation = None
    if test is not None:
        test_cost, test_violation = evaluate_model(model, test, notion, cost_matrix)
    point = FrontierPoint(mu_lambda=float(mu_lambda), model=model,
                          train_cost=train_cost, train_violation=train_violation,
                          test_cost=test_cost, test_violation=test_violation,
                          scorer_gap=scorer_gap, seed=seed,
                          elapsed=time.perf_counter() - started)
    return model, point


def sweep(train: Dataset, test: Dataset | None, notion: FairnessNotion,
          config: TradeoffConfig | None = None) -> list[FrontierPoint]:
    """One frontier point per grid value, plus optional bisection refinement.

    Refinement looks at consecutive violations (test split when present) and
    inserts the midpoint of the interval with the largest jump above the gap
    threshold, up to the budget.  Points depend only on their own mu value
    and the seed, so insertion order cannot change any result.
    """
    config = config if config is not None else TradeoffConfig()
    points: dict[float, FrontierPoint] = {}
    for mu in sorted(set(config.mu_lambda_grid)):
        points[mu] = train_two_step(train, notion, mu, config, test=test)[1]

    budget = config.refine_budget if config.adaptive_refine else 0
    while budget > 0:
        mus = sorted(points)
        viols = [points[m].test_violation if points[m].test_violation is not None
                 else points[m].train_violation for m in mus]
        best_jump, best_mid = 0.0, None
        for lo, hi, v_lo, v_hi in zip(mus, mus[1:], viols, viols[1:]):
            jump = abs(v_hi - v_lo)
            mid = 0.5 * (lo + hi)
            if jump > config.refine_gap and jump > best_jump \
                    and lo < mid < hi and mid not in points:
                best_jump, best_mid = jump, mid
        if best_mid is None:
            break
        points[best_mid] = train_two_step(train, notion, best_mid, config,
                                          test=test)[1]
        budget -= 1
    return [points[m] for m in sorted(points)]


# ---------------------------------------------------------------------------
# proportional-odds baseline


@dataclass(frozen=True)
class PomReport:
    log_likelihood: float
    converged: bool
    iterations: int
    trace: tuple[float, ...] = field(default=())


def _pom_theta(params: np.ndarray, k: int) -> np.ndarray:
    """Cut points from the free parameterization (t0, log-increments)."""
    t0 = params[-(k - 1)]
    if k == 2:
        return np.array([t0])
    return t0 + np.concatenate([[0.0], np.cumsum(np.exp(params[-(k - 2):]))])


def _pom_nll_grad(params: np.ndarray, X: np.ndarray, labels: np.ndarray, k: int):
    """Negative log-likelihood of the cumulative-logit model, with gradient.

    Class y has mass expit(theta_y - s) - expit(theta_{y-1} - s) with the
    outer cuts at -inf and +inf.
    """
    d = X.shape[1]
    w = params[:d]
    theta = _pom_theta(params, k)
    scores = X @ w
    edges = np.concatenate([[-np.inf], theta, [np.inf]])
    z_hi = edges[labels] - scores
    z_lo = edges[labels - 1] - scores
    sig_hi = expit(z_hi)
    sig_lo = expit(z_lo)
    mass = sig_hi - sig_lo
    with np.errstate(divide="ignore"):
        nll = -float(np.sum(np.log(mass)))
    if not np.isfinite(nll):
        return nll, np.full_like(params, np.nan)
    r_hi = sig_hi * (1.0 - sig_hi) / mass
    r_lo = sig_lo * (1.0 - sig_lo) / mass
    grad_w = X.T @ (r_lo - r_hi)
    grad_theta = (np.bincount(labels, weights=r_hi, minlength=k + 1)
                  - np.bincount(labels - 1, weights=r_lo, minlength=k + 1))[1:k]
    grad = np.empty_like(params)
    grad[:d] = grad_w
    grad[d] = grad_theta.sum()
    if k > 2:
        suffix = np.cumsum(grad_theta[::-1])[::-1]
        grad[d + 1:] = np.exp(params[-(k - 2):]) * suffix[1:]
    return nll, -grad


def _pom_initial_params(labels: np.ndarray, k: int, d: int) -> np.ndarray:
    """Zero weights; cuts at the logits of the cumulative label frequencies."""
    n = len(labels)
    counts = np.bincount(labels, minlength=k + 1)[1:]
    cum = np.cumsum(counts)[:-1] / n
    cum = np.clip(cum, 1.0 / (2 * n), 1.0 - 1.0 / (2 * n))
    q = np.log(cum / (1.0 - cum))
    gaps = np.maximum(np.diff(q), 1e-3)
    params = np.zeros(d + k - 1)
    params[d] = q[0]
    if k > 2:
        params[d + 1:] = np.log(gaps)
    return params


def _pom_class_mass(theta: np.ndarray, label: int, s: float) -> float:
    k = len(theta) + 1
    hi = 1.0 if label == k else expit(theta[label - 1] - s)
    lo = 0.0 if label == 1 else expit(theta[label - 2] - s)
    return hi - lo


def _pom_cuts(theta: np.ndarray) -> np.ndarray:
    """Scores at which the most-probable class switches.

    Adjacent class-mass ratios are monotone in the score, so the modal
    class moves through an increasing subsequence; each switch point is
    bisected to float resolution.  Skipped classes (never modal) produce
    collapsed cuts at the switch score.
    """
    k = len(theta) + 1
    lo_edge = float(theta[0]) - 60.0
    hi_edge = float(theta[-1]) + 60.0
    cuts = np.empty(k - 1)
    cur = 1
    anchor = lo_edge
    while cur < k:
        best_root, best_label = None, None
        for cand in range(cur + 1, k + 1):
            def gain(s):
                return _pom_class_mass(theta, cand, s) - _pom_class_mass(theta, cur, s)
            if gain(hi_edge) <= 0:
                continue
            lo, hi = anchor, hi_edge
            if gain(lo) > 0:
                root = lo
            else:
                while True:
                    mid = 0.5 * (lo + hi)
                    if not lo < mid < hi:
                        break
                    if gain(mid) > 0:
                        hi = mid
                    else:
                        lo = mid
                root = hi
            if best_root is None or root < best_root:
                best_root, best_label = root, cand
        if best_root is None:
            cuts[cur - 1:] = hi_edge
            break
        cuts[cur - 1:best_label - 1] = best_root
        cur = best_label
        anchor = best_root
    return cuts


def fit_pom(train: Dataset, max_iterations: int = 500, tolerance: float = 1e-6,
            learning_rate: float = 1.0,
            collect_trace: bool = False) -> tuple[ThresholdModel, PomReport]:
    """Cumulative-logit baseline fit by ascent with backtracking.

    Cut ordering is enforced by optimizing log-increments, so every iterate
    is a valid model.  Prediction takes the most-probable class, which is a
    thresholding of the score; those switch points become the model's cuts.
    """
    k = train.num_classes
    means, stds, normed = _standardize(train)
    labels = train.labels
    params = _pom_initial_params(labels, k, train.dim)
    nll, grad = _pom_nll_grad(params, normed, labels, k)
    trace = [-nll] if collect_trace else []
    step = learning_rate
    converged = False
    iterations = max_iterations
    for it in range(max_iterations):
        gmax = float(np.max(np.abs(grad)))
        if gmax <= tolerance:
            converged, iterations = True, it
            break
        gsq = float(grad @ grad)
        step = min(step * 2.0, 1e6)
        while True:
            cand = params - step * grad
            nll_new, grad_new = _pom_nll_grad(cand, normed, labels, k)
            if np.isfinite(nll_new) and nll_new <= nll - 1e-4 * step * gsq:
                break
            step *= 0.5
            if step < 1e-14:
                break
        if step < 1e-14:
            iterations = it + 1
            break
        params, nll, grad = cand, nll_new, grad_new
        if collect_trace:
            trace.append(-nll)

    w = params[:train.dim]
    theta = _pom_theta(params, k)
    model = ThresholdModel(scorer=LinearScorer(w.copy()),
                           thresholds=Thresholds(_pom_cuts(theta)),
                           feature_means=means, feature_stds=stds,
                           metadata={"baseline": "pom",
                                     "log_likelihood": -nll})
    report = PomReport(log_likelihood=-nll, converged=converged,
                       iterations=iterations, trace=tuple(trace))
    return model, report


def _lower_median(labels: np.ndarray) -> int:
    ordered = np.sort(labels)
    return int(ordered[(len(ordered) - 1) // 2])


def constant_median_baseline(train: Dataset) -> ThresholdModel:
    """Zero scorer with cuts that force the lower median label everywhere."""
    med = _lower_median(train.labels)
    k = train.num_classes
    theta = np.where(np.arange(1, k) < med, -1.0, 1.0)
    return ThresholdModel.plain(np.zeros(train.dim), theta,
                                metadata={"baseline": "constant_median",
                                          "label": med})


def mixture_eval(base: ThresholdModel, train: Dataset, test: Dataset, p_grid,
                 trials: int = 100, cost_matrix: CostMatrix | None = None,
                 notion: FairnessNotion = FairnessNotion.PAIRWISE_DP,
                 seed: int = 0) -> list[MixturePoint]:
    """Monte Carlo frontier of mixing the base model with the train median.

    Each test point independently takes the median label with probability p,
    else the base prediction; cost and violation are averaged over trials.
    The endpoints p=0 and p=1 are deterministic and evaluated directly.
    Trial streams are derived from (seed, grid index, trial), so evaluation
    order cannot affect any number.
    """
    if trials < 1:
        raise DataError("trials must be positive")
    cost_matrix = cost_matrix or CostMatrix.absolute(test.num_classes)
    med = _lower_median(train.labels)
    base_preds = base.predictions(test.features)

    def metrics_of(preds):
        return (expected_cost(test.labels, preds, cost_matrix),
                _violation(notion, test, preds))

    points = []
    for p_idx, p in enumerate(p_grid):
        p = float(p)
        if not 0 <= p <= 1:
            raise DataError("mixture probabilities must lie in [0, 1]")
        if p == 0.0:
            cost, viol = metrics_of(base_preds)
        elif p == 1.0:
            cost, viol = metrics_of(np.full(test.n, med))
        else:
            cost_sum = viol_sum = 0.0
            for trial in range(trials):
                rng = np.random.default_rng([seed, p_idx, trial])
                take_med = rng.random(test.n) < p
                preds = np.where(take_med, med, base_preds)
                cost, viol = metrics_of(preds)
                cost_sum += cost
                viol_sum += viol
            cost, viol = cost_sum / trials, viol_sum / trials
        points.append(MixturePoint(p=p, cost=cost, violation=viol))
    return points


def fair_thresholds_for_scorer(model: ThresholdModel, train: Dataset,
                               notion: FairnessNotion, lam: float,
                               cost_matrix: CostMatrix | None = None,
                               restarts: int = 10,
                               init_policy: str = "cost_only_dp",
                               seed: int = 0) -> ThresholdModel:
    """Re-threshold an existing scorer under the penalized objective.

    Keeps the model's scorer and normalizer and only replaces the cuts,
    which expresses the unfair-scorer-plus-fair-thresholds variant.
    """
    cost_matrix = cost_matrix or CostMatrix.absolute(train.num_classes)
    config = ThresholdObjectiveConfig(lam=lam, cost_matrix=cost_matrix,
                                      notion=notion, restarts=restarts,
                                      init_policy=init_policy, seed=seed)
    search = local_search(model.scores(train.features), train.labels,
                          train.attrs, config)
    metadata = dict(model.metadata)
    metadata.update({"rethresholded": True, "lambda": lam})
    return ThresholdModel(scorer=model.scorer, thresholds=search.thresholds,
                          feature_means=model.feature_means,
                          feature_stds=model.feature_stds,
                          notion=notion, metadata=metadata)

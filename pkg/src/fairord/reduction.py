"""Fair scoring functions via pairwise binary classification.

An ordinal sample becomes a binary problem over score differences: every
ordered pair with unequal labels contributes (x_i - x_j, sign(y_i - y_j))
and remembers its ordered group pair.  A linear classifier on differences
is a linear scorer on points, and its group gap on the pair dataset is the
scorer's pairwise violation, so constrained binary training carries over.

Training runs a multiplier grid: each grid point reweights the instances
with a cost-sensitive fairness term, fits an intercept-free L2 logistic
model by full-batch descent, and the winner minimizes
(1 - mu) * error + mu * gap on the pair dataset.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .core import DataError, Dataset, FairnessNotion, LinearScorer, _frozen_array
from .metrics import pair_gap_value

__all__ = [
    "PairwiseDataset",
    "FairClassifierConfig",
    "GridPointResult",
    "TrainingReport",
    "build_pairwise_dataset",
    "classifier_fairness_gap",
    "train_fair_scorer",
]

GAMMA_LADDER = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)

_PAIRWISE = (FairnessNotion.PAIRWISE_DP, FairnessNotion.PAIRWISE_EO)


@dataclass(frozen=True)
class PairwiseDataset:
    """Ordered label-distinct pairs as binary instances.

    Rows are (x_i - x_j, sign(y_i - y_j), (a_i, a_j)).  When no cap was
    applied the set is closed under negation: each row's mirror
    (-diff, -label, swapped groups) is also a row.
    """

    diffs: np.ndarray
    pair_labels: np.ndarray
    pair_attrs: np.ndarray
    num_groups: int
    source_size: int
    cap_applied: bool
    seed: int

    def __post_init__(self):
        diffs = _frozen_array(np.asarray(self.diffs, dtype=float), float)
        labels = _frozen_array(np.asarray(self.pair_labels), np.int64)
        attrs = _frozen_array(np.asarray(self.pair_attrs), np.int64)
        if diffs.ndim != 2 or len(diffs) == 0:
            raise DataError("pairwise dataset needs a non-empty 2-d diff matrix")
        if labels.shape != (len(diffs),) or attrs.shape != (len(diffs), 2):
            raise DataError("pairwise dataset fields disagree on length")
        if not np.all(np.isin(labels, (-1, 1))):
            raise DataError("pair labels must be -1 or +1")
        if self.num_groups < 1 or attrs.min() < 0 or attrs.max() >= self.num_groups:
            raise DataError("pair group ids out of range")
        object.__setattr__(self, "diffs", diffs)
        object.__setattr__(self, "pair_labels", labels)
        object.__setattr__(self, "pair_attrs", attrs)

    @property
    def n(self) -> int:
        return len(self.diffs)

    @property
    def dim(self) -> int:
        return self.diffs.shape[1]


@dataclass(frozen=True)
class FairClassifierConfig:
    """Knobs for the multiplier-grid trainer.

    reg_strength=None selects the L2 strength from GAMMA_LADDER by
    cross-validated unconstrained 0-1 error; ties keep the strongest.
    """

    mu: float
    grid_size: int = 100
    grid_limit: float = 3.0
    learning_rate: float = 1.0
    max_iterations: int = 2500
    tolerance: float = 1e-6
    reg_strength: float | None = None
    cv_folds: int = 10
    pair_cap: int = 600_000
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.mu < 1:
            raise DataError("mu must lie in [0, 1)")
        if self.grid_size < 1:
            raise DataError("grid_size must be positive")
        if self.grid_limit <= 0:
            raise DataError("grid_limit must be positive")
        if self.learning_rate <= 0 or self.max_iterations < 1:
            raise DataError("learning_rate and max_iterations must be positive")
        if self.tolerance <= 0:
            raise DataError("tolerance must be positive")
        if self.reg_strength is not None and self.reg_strength <= 0:
            raise DataError("reg_strength must be positive when given")
        if self.cv_folds < 2:
            raise DataError("cv_folds must be at least 2")
        if self.pair_cap < 1:
            raise DataError("pair_cap must be positive")


@dataclass(frozen=True)
class GridPointResult:
    multipliers: tuple[float, ...]
    error: float
    gap: float
    objective: float
    converged: bool
    iterations: int

    def to_json_dict(self) -> dict:
        return {"lambda": list(self.multipliers), "error": self.error,
                "gap": self.gap, "objective": self.objective,
                "converged": self.converged, "iterations": self.iterations}


@dataclass(frozen=True)
class TrainingReport:
    notion: FairnessNotion
    mu: float
    reg_strength: float
    cv_errors: tuple[tuple[float, float], ...]
    grid_points: tuple[GridPointResult, ...]
    winner_index: int

    def to_json_dict(self) -> dict:
        return {
            "notion": self.notion.value,
            "mu": self.mu,
            "reg_strength": self.reg_strength,
            "cv": [{"gamma": g, "error": e} for g, e in self.cv_errors],
            "winner_index": self.winner_index,
            "grid": [p.to_json_dict() for p in self.grid_points],
        }


def build_pairwise_dataset(dataset: Dataset, cap: int = 600_000,
                           seed: int = 0) -> PairwiseDataset:
    """All ordered pairs with unequal labels, capped by seeded subsampling."""
    if cap < 1:
        raise DataError("cap must be positive")
    y = dataset.labels
    unequal = y[:, None] != y[None, :]
    ii, jj = np.nonzero(unequal)
    if len(ii) == 0:
        raise DataError("degenerate labels: every label is identical, no pairs to build")
    cap_applied = len(ii) > cap
    if cap_applied:
        keep = np.random.default_rng(seed).choice(len(ii), size=cap, replace=False)
        keep.sort()
        ii, jj = ii[keep], jj[keep]
    diffs = dataset.features[ii] - dataset.features[jj]
    pair_labels = np.sign(y[ii] - y[jj]).astype(np.int64)
    pair_attrs = np.stack([dataset.attrs[ii], dataset.attrs[jj]], axis=1)
    return PairwiseDataset(diffs=diffs, pair_labels=pair_labels, pair_attrs=pair_attrs,
                           num_groups=dataset.num_groups, source_size=dataset.n,
                           cap_applied=cap_applied, seed=seed)


def _weights_of(w) -> np.ndarray:
    if isinstance(w, LinearScorer):
        return w.weights
    return np.asarray(w, dtype=float)


def classifier_fairness_gap(w, pairs: PairwiseDataset,
                            notion: FairnessNotion = FairnessNotion.PAIRWISE_DP) -> float:
    """Largest group-pair gap in P[c_w = 1] over the pair dataset.

    c_w(diff) = 1 iff w . diff > 0 (ties predict -1).  The probability is
    conditioned on the ordered group pair, and for the label-conditioned
    notion additionally on pair label +1.  Group pairs with an empty
    conditioning event are skipped; with nothing to compare the gap is 0.
    """
    if notion not in _PAIRWISE:
        raise DataError(f"classifier gap is defined for the pairwise criteria, "
                        f"not {notion.value}")
    wv = _weights_of(w)
    positive = (pairs.diffs @ wv) > 0
    if notion is FairnessNotion.PAIRWISE_EO:
        cond = pairs.pair_labels == 1
    else:
        cond = np.ones(pairs.n, dtype=bool)
    first, second = pairs.pair_attrs[:, 0], pairs.pair_attrs[:, 1]
    best = 0.0
    for a in range(pairs.num_groups):
        for b in range(a + 1, pairs.num_groups):
            mask_fwd = cond & (first == a) & (second == b)
            mask_bwd = cond & (first == b) & (second == a)
            n_fwd = int(np.count_nonzero(mask_fwd))
            n_bwd = int(np.count_nonzero(mask_bwd))
            if n_fwd == 0 or n_bwd == 0:
                continue
            gap = pair_gap_value(int(np.count_nonzero(positive & mask_fwd)), n_fwd,
                                 int(np.count_nonzero(positive & mask_bwd)), n_bwd)
            best = gap if gap > best else best
    return best


# ---------------------------------------------------------------------------
# weighted logistic model


def _logistic_loss_grad(X, labels, weights, gamma, w):
    """Mean weighted log-loss plus gamma * |w|^2, with its gradient."""
    n = len(labels)
    margins = labels * (X @ w)
    loss = float(weights @ np.logaddexp(0.0, -margins)) / n + gamma * float(w @ w)
    pull = weights * labels * expit(-margins)
    grad = -(X.T @ pull) / n + 2.0 * gamma * w
    return loss, grad


def _fit_logistic(X, labels, weights, gamma, learning_rate, max_iterations, tol):
    """Full-batch descent with Armijo backtracking from a zero start.

    Returns (w, converged, iterations); converged means the gradient
    sup-norm reached tol.  Deterministic: no randomness anywhere.
    """
    w = np.zeros(X.shape[1])
    step = learning_rate
    loss, grad = _logistic_loss_grad(X, labels, weights, gamma, w)
    for it in range(max_iterations):
        gmax = float(np.max(np.abs(grad))) if len(grad) else 0.0
        if gmax <= tol:
            return w, True, it
        gsq = float(grad @ grad)
        step = min(step * 2.0, 1e6)
        while True:
            w_new = w - step * grad
            loss_new, grad_new = _logistic_loss_grad(X, labels, weights, gamma, w_new)
            if loss_new <= loss - 1e-4 * step * gsq:
                break
            step *= 0.5
            if step < 1e-14:
                return w, False, it + 1
        w, loss, grad = w_new, loss_new, grad_new
    return w, False, max_iterations


def _zero_one_error(X, labels, w) -> float:
    preds = np.where(X @ w > 0, 1, -1)
    return float(np.mean(preds != labels))


def _select_gamma(X, labels, config: FairClassifierConfig):
    """Cross-validated unconstrained 0-1 error over the gamma ladder."""
    m = len(labels)
    rng = np.random.default_rng([config.seed, 1])
    perm = rng.permutation(m)
    folds = np.array_split(perm, min(config.cv_folds, m))
    labels_f = labels.astype(float)
    rows = []
    best = None
    for gamma in GAMMA_LADDER:
        wrong = 0
        for val_idx in folds:
            if len(val_idx) == 0:
                continue
            train_mask = np.ones(m, dtype=bool)
            train_mask[val_idx] = False
            Xt = X[train_mask]
            w, _, _ = _fit_logistic(Xt, labels_f[train_mask], np.ones(len(Xt)),
                                    gamma, config.learning_rate,
                                    config.max_iterations, config.tolerance)
            preds = np.where(X[val_idx] @ w > 0, 1, -1)
            wrong += int(np.count_nonzero(preds != labels[val_idx]))
        err = wrong / m
        rows.append((gamma, err))
        if best is None or err < best[0]:
            best = (err, gamma)
    return best[1], tuple(rows)


def _multiplier_grid(num_pairs: int, config: FairClassifierConfig):
    if num_pairs == 0:
        return [()]
    per_axis = max(2, round(config.grid_size ** (1.0 / num_pairs)))
    if num_pairs == 1:
        per_axis = config.grid_size
    axis = np.linspace(-config.grid_limit, config.grid_limit, per_axis)
    return [tuple(float(v) for v in point)
            for point in itertools.product(axis, repeat=num_pairs)]


def train_fair_scorer(pairs: PairwiseDataset, config: FairClassifierConfig,
                      notion: FairnessNotion = FairnessNotion.PAIRWISE_DP):
    """Multiplier-grid training; returns (LinearScorer, TrainingReport).

    Each grid point prices predicting +1 on instance t at
    1{y'=-1} + sum over group pairs of lambda * (1{a'=(a,b)}/n_(a,b)
    - 1{a'=(b,a)}/n_(b,a)) * n/2, and predicting -1 at 1{y'=+1}; the
    label-conditioned notion applies the fairness term only on y'=+1
    instances with counts taken there.  Cheaper side becomes the working
    label (ties -1) with weight |cost difference|.
    """
    if notion not in _PAIRWISE:
        raise DataError(f"training targets the pairwise criteria, not {notion.value}")
    if notion is FairnessNotion.PAIRWISE_EO and pairs.num_groups != 2:
        raise DataError("the label-conditioned trainer needs exactly two groups")
    if notion is FairnessNotion.PAIRWISE_DP and pairs.num_groups > 3:
        raise DataError("the parity trainer is limited to three groups")

    X = pairs.diffs
    yb = pairs.pair_labels
    m = pairs.n
    if notion is FairnessNotion.PAIRWISE_EO:
        cond = yb == 1
    else:
        cond = np.ones(m, dtype=bool)
    first, second = pairs.pair_attrs[:, 0], pairs.pair_attrs[:, 1]

    group_pairs = list(itertools.combinations(range(pairs.num_groups), 2))
    coefs = []
    for a, b in group_pairs:
        mask_fwd = cond & (first == a) & (second == b)
        mask_bwd = cond & (first == b) & (second == a)
        coef = np.zeros(m)
        n_fwd = int(np.count_nonzero(mask_fwd))
        n_bwd = int(np.count_nonzero(mask_bwd))
        if n_fwd:
            coef[mask_fwd] = 1.0 / n_fwd
        if n_bwd:
            coef[mask_bwd] = -1.0 / n_bwd
        coefs.append(coef * (m / 2.0))

    if config.reg_strength is not None:
        gamma, cv_rows = config.reg_strength, ()
    else:
        gamma, cv_rows = _select_gamma(X, yb, config)

    base_plus = (yb == -1).astype(float)
    base_minus = (yb == 1).astype(float)
    grid = _multiplier_grid(len(group_pairs), config)

    points = []
    best = None  # (objective, index, weights)
    for gi, lam_vec in enumerate(grid):
        cost_plus = base_plus.copy()
        for lam, coef in zip(lam_vec, coefs):
            cost_plus += lam * coef
        diff = cost_plus - base_minus
        eff = np.where(diff < 0, 1.0, -1.0)
        wts = np.abs(diff)
        w, converged, iters = _fit_logistic(X, eff, wts, gamma,
                                            config.learning_rate,
                                            config.max_iterations,
                                            config.tolerance)
        err = _zero_one_error(X, yb, w)
        gap = classifier_fairness_gap(w, pairs, notion)
        obj = (1.0 - config.mu) * err + config.mu * gap
        points.append(GridPointResult(multipliers=lam_vec, error=err, gap=gap,
                                      objective=obj, converged=converged,
                                      iterations=iters))
        if best is None or obj < best[0]:
            best = (obj, gi, w)

    report = TrainingReport(notion=notion, mu=config.mu, reg_strength=gamma,
                            cv_errors=cv_rows, grid_points=tuple(points),
                            winner_index=best[1])
    return LinearScorer(best[2]), report

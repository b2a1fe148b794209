"""Exhaustive score-permutation study and sampling-convergence experiment.

The permutation study asks: when a scorer treats groups very unequally, how
hard is it to land on fair thresholds by chance?  For a fixed profile
pattern it walks every assignment of the distinct scores 1..n, computes the
scorer's pairwise violation, and counts the fraction of threshold
placements whose predictor is perfectly fair.

The convergence experiment samples i.i.d. datasets of growing size from a
finite population and tracks how fast the empirical violation approaches
the exact population value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
from scipy.stats import spearmanr

from .core import (DataError, FairnessNotion, GuardError, ThresholdModel,
                   _frozen_array)
from .metrics import (dp_report_from_cells, eo_report_from_cells,
                      pairwise_dp_viol, pairwise_eo_viol, scorer_dp_viol,
                      scorer_eo_viol)

__all__ = [
    "SimulationRow",
    "SimulationResult",
    "FinitePopulation",
    "ConvergenceRow",
    "ConvergenceResult",
    "enumerate_fair_threshold_fractions",
    "convergence_experiment",
]

_PERMUTATION_GUARD = 10


@dataclass(frozen=True)
class SimulationRow:
    """One distinct arrangement of profiles over the score ranks.

    multiplicity counts how many raw score permutations collapse onto it
    (interchangeable points share a profile).
    """

    arrangement: tuple[int, ...]
    scorer_violation: float
    fair_fraction: float
    multiplicity: int

    def to_row(self) -> dict:
        return {"scorer_violation": self.scorer_violation,
                "fair_fraction": self.fair_fraction,
                "multiplicity": self.multiplicity}


@dataclass(frozen=True)
class SimulationResult:
    notion: FairnessNotion
    n: int
    k: int
    num_placements: int
    rows: tuple[SimulationRow, ...]
    spearman: float | None

    def to_rows(self) -> list[dict]:
        return [r.to_row() for r in self.rows]


def _multiset_arrangements(counts: list[int]):
    """All distinct sequences using each profile id counts[id] times."""
    total = sum(counts)
    prefix: list[int] = []

    def rec():
        if len(prefix) == total:
            yield tuple(prefix)
            return
        for pid, left in enumerate(counts):
            if left:
                counts[pid] -= 1
                prefix.append(pid)
                yield from rec()
                prefix.pop()
                counts[pid] += 1

    yield from rec()


def _placement_boundaries(n: int, k: int) -> np.ndarray:
    """Sorted cut multisets from {0..n}, padded with the outer boundaries."""
    from itertools import combinations_with_replacement
    combos = list(combinations_with_replacement(range(n + 1), k - 1))
    bounds = np.zeros((len(combos), k + 1), dtype=np.int64)
    bounds[:, 1:k] = np.asarray(combos, dtype=np.int64)
    bounds[:, k] = n
    return bounds


def _fair_placement_mask_dp(attrs_by_rank, num_groups, bounds) -> np.ndarray:
    """Placements whose predictor has zero parity violation, exactly.

    Equal group totals make forward and backward denominators equal, so
    fairness is the integer test fwd == bwd on every valid group pair.
    """
    n = len(attrs_by_rank)
    one_hot = np.zeros((num_groups, n + 1), dtype=np.int64)
    for pos, g in enumerate(attrs_by_rank, start=1):
        one_hot[g, pos] = 1
    prefix = np.cumsum(one_hot, axis=1)
    per_bin = prefix[:, bounds].transpose(1, 0, 2)
    per_bin = np.diff(per_bin, axis=2)
    below = np.cumsum(per_bin, axis=2) - per_bin
    fwd = np.einsum("pgv,phv->pgh", per_bin, below)
    totals = per_bin.sum(axis=2)[0]
    mask = np.ones(len(bounds), dtype=bool)
    for g in range(num_groups):
        for h in range(g + 1, num_groups):
            if totals[g] > 0 and totals[h] > 0:
                mask &= fwd[:, g, h] == fwd[:, h, g]
    return mask


def _fair_placement_mask_eo(attrs_by_rank, labels_by_rank, num_groups, k,
                            bounds) -> np.ndarray:
    """Zero label-conditioned violation, as exact integer cross-products."""
    n = len(attrs_by_rank)
    one_hot = np.zeros((num_groups, k, n + 1), dtype=np.int64)
    for pos, (g, y) in enumerate(zip(attrs_by_rank, labels_by_rank), start=1):
        one_hot[g, y - 1, pos] = 1
    prefix = np.cumsum(one_hot, axis=2)
    per_bin = prefix[:, :, bounds].transpose(2, 0, 1, 3)
    per_bin = np.diff(per_bin, axis=3)
    lab_below = np.cumsum(per_bin, axis=2) - per_bin
    pred_below = np.cumsum(lab_below, axis=3) - lab_below
    fwd = np.einsum("pgyv,phyv->pgh", per_bin, pred_below)

    label_totals = per_bin.sum(axis=3)[0]
    lab_below_tot = np.cumsum(label_totals, axis=1) - label_totals
    den = label_totals @ lab_below_tot.T
    mask = np.ones(len(bounds), dtype=bool)
    for g in range(num_groups):
        for h in range(num_groups):
            if g < h and den[g, h] > 0 and den[h, g] > 0:
                mask &= (fwd[:, g, h] * den[h, g] == fwd[:, h, g] * den[g, h])
    return mask


def enumerate_fair_threshold_fractions(n: int, k: int, attrs, labels=None,
                                       notion: FairnessNotion = FairnessNotion.PAIRWISE_DP
                                       ) -> SimulationResult:
    """Scorer violation vs fair-placement fraction over all score orders.

    Scores are the ranks 1..n; every distinct arrangement of the point
    profiles over ranks is evaluated once and weighted by the number of raw
    permutations mapping to it.  The parity notion ignores labels; the
    label-conditioned notion requires them.
    """
    if n > _PERMUTATION_GUARD:
        raise GuardError(f"permutation study limited to n <= {_PERMUTATION_GUARD}, "
                         f"got n={n}")
    if k < 2:
        raise DataError("need at least two classes")
    attrs = np.asarray(attrs, dtype=np.int64)
    if attrs.shape != (n,):
        raise DataError("attrs must have length n")
    if attrs.min() < 0:
        raise DataError("group ids must be non-negative")
    num_groups = int(attrs.max()) + 1
    if num_groups < 2:
        raise DataError("the study needs at least two groups")

    if notion is FairnessNotion.PAIRWISE_EO:
        if labels is None:
            raise DataError("the label-conditioned notion requires labels")
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (n,):
            raise DataError("labels must have length n")
        if labels.min() < 1 or labels.max() > k:
            raise DataError("labels must lie in 1..k")
        profiles = list(zip(attrs.tolist(), labels.tolist()))
    elif notion is FairnessNotion.PAIRWISE_DP:
        profiles = [(g,) for g in attrs.tolist()]
    else:
        raise DataError(f"the study covers the pairwise criteria, not {notion.value}")

    distinct = sorted(set(profiles))
    index_of = {p: i for i, p in enumerate(distinct)}
    counts = [0] * len(distinct)
    for p in profiles:
        counts[index_of[p]] += 1
    multiplicity = 1
    for c in counts:
        multiplicity *= factorial(c)

    bounds = _placement_boundaries(n, k)
    num_placements = len(bounds)
    ranks = np.arange(1, n + 1, dtype=float)
    rows = []
    for arrangement in _multiset_arrangements(counts):
        arr_attrs = np.array([distinct[pid][0] for pid in arrangement],
                             dtype=np.int64)
        if notion is FairnessNotion.PAIRWISE_EO:
            arr_labels = np.array([distinct[pid][1] for pid in arrangement],
                                  dtype=np.int64)
            scorer_report = scorer_eo_viol(arr_attrs, arr_labels, ranks,
                                           num_groups=num_groups)
            fair = _fair_placement_mask_eo(arr_attrs, arr_labels, num_groups,
                                           k, bounds)
        else:
            scorer_report = scorer_dp_viol(arr_attrs, ranks, num_groups=num_groups)
            fair = _fair_placement_mask_dp(arr_attrs, num_groups, bounds)
        rows.append(SimulationRow(arrangement=tuple(arrangement),
                                  scorer_violation=scorer_report.violation,
                                  fair_fraction=int(fair.sum()) / num_placements,
                                  multiplicity=multiplicity))

    viols = np.repeat([r.scorer_violation for r in rows],
                      [r.multiplicity for r in rows])
    fracs = np.repeat([r.fair_fraction for r in rows],
                      [r.multiplicity for r in rows])
    if np.all(viols == viols[0]) or np.all(fracs == fracs[0]):
        rho = None
    else:
        rho = float(spearmanr(viols, fracs)[0])
    return SimulationResult(notion=notion, n=n, k=k,
                            num_placements=num_placements, rows=tuple(rows),
                            spearman=rho)


# ---------------------------------------------------------------------------
# sampling convergence


@dataclass(frozen=True)
class FinitePopulation:
    """Finite-support distribution over (features, group, label) triples."""

    features: np.ndarray
    attrs: np.ndarray
    labels: np.ndarray
    probs: np.ndarray
    num_groups: int | None = None

    def __post_init__(self):
        features = np.atleast_2d(np.asarray(self.features, dtype=float))
        attrs = np.asarray(self.attrs, dtype=np.int64)
        labels = np.asarray(self.labels, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=float)
        m = features.shape[0]
        if attrs.shape != (m,) or labels.shape != (m,) or probs.shape != (m,):
            raise DataError("population fields disagree on length")
        if np.any(probs < 0) or abs(float(probs.sum()) - 1.0) > 1e-9:
            raise DataError("probabilities must be non-negative and sum to 1")
        if attrs.min() < 0 or labels.min() < 1:
            raise DataError("group ids start at 0 and labels at 1")
        groups = self.num_groups if self.num_groups is not None \
            else int(attrs.max()) + 1
        if int(attrs.max()) >= groups:
            raise DataError("group id exceeds num_groups")
        group_mass = np.bincount(attrs, weights=probs, minlength=groups)
        if np.any(group_mass <= 0):
            raise DataError("every group needs positive probability")
        object.__setattr__(self, "features", _frozen_array(features, float))
        object.__setattr__(self, "attrs", _frozen_array(attrs, np.int64))
        object.__setattr__(self, "labels", _frozen_array(labels, np.int64))
        object.__setattr__(self, "probs", _frozen_array(probs, float))
        object.__setattr__(self, "num_groups", groups)

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @classmethod
    def from_dataset(cls, dataset) -> "FinitePopulation":
        """Uniform weights on the rows of a dataset."""
        m = dataset.n
        return cls(features=dataset.features, attrs=dataset.attrs,
                   labels=dataset.labels, probs=np.full(m, 1.0 / m),
                   num_groups=dataset.num_groups)


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    mean_deviation: float
    quantile_deviation: float

    def to_row(self) -> dict:
        return {"n": self.n, "mean_deviation": self.mean_deviation,
                "quantile_deviation": self.quantile_deviation}


@dataclass(frozen=True)
class ConvergenceResult:
    notion: FairnessNotion
    delta: float
    repetitions: int
    population_violation: float
    rows: tuple[ConvergenceRow, ...]

    def to_rows(self) -> list[dict]:
        return [r.to_row() for r in self.rows]


def _population_violation(population: FinitePopulation, preds: np.ndarray,
                          k: int, notion: FairnessNotion) -> float:
    """Exact weighted pairwise violation over the finite support."""
    groups = population.num_groups
    if notion is FairnessNotion.PAIRWISE_DP:
        cells = np.zeros((groups, k))
        np.add.at(cells, (population.attrs, preds - 1), population.probs)
        return dp_report_from_cells(cells).violation
    cells = np.zeros((groups, k, k))
    np.add.at(cells, (population.attrs, population.labels - 1, preds - 1),
              population.probs)
    return eo_report_from_cells(cells).violation


def _sample_violation(attrs, labels, preds, k, groups,
                      notion: FairnessNotion) -> float:
    if notion is FairnessNotion.PAIRWISE_DP:
        return pairwise_dp_viol(attrs, preds, num_classes=k,
                                num_groups=groups).violation
    return pairwise_eo_viol(attrs, labels, preds, num_classes=k,
                            num_groups=groups).violation


def convergence_experiment(population: FinitePopulation, model: ThresholdModel,
                           n_grid, repetitions: int = 200, delta: float = 0.1,
                           seed: int = 0,
                           notion: FairnessNotion = FairnessNotion.PAIRWISE_DP
                           ) -> ConvergenceResult:
    """Empirical-vs-population violation deviations across sample sizes.

    Each repetition draws an i.i.d. sample of the support indices; the
    stream is derived from (seed, n, repetition), so rows are independent
    of evaluation order.  Samples on which the criterion is undefined are
    redrawn from the same stream.  The reported quantile is the empirical
    (1-delta) order statistic, rounded up.
    """
    if repetitions < 1:
        raise DataError("repetitions must be positive")
    if not 0 < delta < 1:
        raise DataError("delta must lie in (0, 1)")
    if notion not in (FairnessNotion.PAIRWISE_DP, FairnessNotion.PAIRWISE_EO):
        raise DataError(f"convergence covers the pairwise criteria, not {notion.value}")
    k = model.num_classes
    support_preds = model.predictions(population.features)
    viol_pop = _population_violation(population, support_preds, k, notion)
    groups = population.num_groups

    rows = []
    for n in n_grid:
        n = int(n)
        if n < 1:
            raise DataError("sample sizes must be positive")
        devs = np.empty(repetitions)
        for rep in range(repetitions):
            rng = np.random.default_rng([seed, n, rep])
            while True:
                idx = rng.choice(population.size, size=n, p=population.probs)
                try:
                    viol = _sample_violation(population.attrs[idx],
                                             population.labels[idx],
                                             support_preds[idx], k, groups,
                                             notion)
                except DataError:
                    continue
                break
            devs[rep] = abs(viol - viol_pop)
        rows.append(ConvergenceRow(n=n, mean_deviation=float(devs.mean()),
                                   quantile_deviation=float(
                                       np.quantile(devs, 1.0 - delta,
                                                   method="higher"))))
    return ConvergenceResult(notion=notion, delta=delta, repetitions=repetitions,
                             population_violation=viol_pop, rows=tuple(rows))

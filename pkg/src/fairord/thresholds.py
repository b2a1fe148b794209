"""Threshold placement for a frozen linear scorer.

Every solver here optimizes the same quantity: expected prediction cost
plus ``lam`` times the pairwise violation of the chosen criterion.
Thresholds are searched over cut positions in the score-sorted sample, so
tied scores always share a bin and every returned threshold vector is
reproducible from its positions.

``cost_only_dp`` ignores fairness and runs in O(n k^2) after sorting.
``exact_dp`` additionally tracks cross-group pair-count balances, which
makes it exact but quadratic-table sized, so it is gated to small inputs.
``local_search`` scales to real data; on inputs the exact solver accepts
the two can be compared outcome for outcome.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .core import (
    CostMatrix,
    DataError,
    FairnessNotion,
    GuardError,
    Thresholds,
    predictions_from_scores,
)
from .metrics import (
    _label_order_counts,
    expected_cost,
    pair_gap_value,
    pairwise_dp_viol,
    pairwise_eo_viol,
)

__all__ = [
    "ThresholdObjectiveConfig",
    "ObjectiveBreakdown",
    "ThresholdSolution",
    "CostOnlySolution",
    "TraceEntry",
    "RestartOutcome",
    "LocalSearchResult",
    "objective",
    "cost_only_dp",
    "exact_dp",
    "local_search",
    "brute_force_thresholds",
]

_SEARCHABLE = (FairnessNotion.PAIRWISE_DP, FairnessNotion.PAIRWISE_EO)


@dataclass(frozen=True)
class ThresholdObjectiveConfig:
    """Objective weights plus the local-search knobs.

    The objective fields (lam, cost_matrix, notion) are read by every
    solver; restarts, init_policy, max_iterations, and seed only steer
    local_search.  max_iterations=None means 10 n k accepted moves.
    """

    lam: float
    cost_matrix: CostMatrix
    notion: FairnessNotion = FairnessNotion.PAIRWISE_DP
    restarts: int = 10
    init_policy: str = "random"
    max_iterations: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise DataError("lam must be a finite non-negative number")
        if self.notion not in _SEARCHABLE:
            raise DataError("threshold search supports the two pairwise criteria, "
                            f"not {self.notion.value}")
        if self.restarts < 1:
            raise DataError("restarts must be positive")
        if self.init_policy not in ("random", "cost_only_dp"):
            raise DataError(f"unknown init policy: {self.init_policy!r}")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise DataError("max_iterations must be non-negative")


@dataclass(frozen=True)
class ObjectiveBreakdown:
    cost: float
    violation: float
    value: float


@dataclass(frozen=True)
class ThresholdSolution:
    thresholds: Thresholds
    positions: tuple[int, ...]
    objective: float
    cost: float
    violation: float


@dataclass(frozen=True)
class CostOnlySolution:
    thresholds: Thresholds
    positions: tuple[int, ...]
    cost: float


def objective(scores, labels, attrs, thresholds, config: ThresholdObjectiveConfig,
              num_groups: int | None = None) -> ObjectiveBreakdown:
    """Evaluate cost + lam * violation for an explicit threshold vector."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if not isinstance(thresholds, Thresholds):
        thresholds = Thresholds(np.asarray(thresholds, dtype=float))
    k = config.cost_matrix.num_classes
    preds = predictions_from_scores(scores, thresholds)
    cost = expected_cost(labels, preds, config.cost_matrix)
    if config.notion is FairnessNotion.PAIRWISE_DP:
        report = pairwise_dp_viol(attrs, preds, num_classes=k, num_groups=num_groups)
    else:
        report = pairwise_eo_viol(attrs, labels, preds, num_classes=k, num_groups=num_groups)
    value = cost + config.lam * report.violation
    return ObjectiveBreakdown(cost=cost, violation=report.violation, value=value)


# ---------------------------------------------------------------------------
# sorted-problem plumbing


def _check_inputs(scores, labels, k, attrs=None):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.ndim != 1 or labels.shape != scores.shape or scores.size == 0:
        raise DataError("scores and labels must be equal-length non-empty vectors")
    if not np.all(np.isfinite(scores)):
        raise DataError("scores must be finite")
    if labels.min() < 1 or labels.max() > k:
        raise DataError(f"labels must lie in 1..{k}")
    if attrs is None:
        return scores, labels, None
    attrs = np.asarray(attrs, dtype=np.int64)
    if attrs.shape != scores.shape:
        raise DataError("attrs must match scores in length")
    if attrs.min() < 0:
        raise DataError("group ids must be non-negative")
    return scores, labels, attrs


def _feasible_cuts(sorted_scores: np.ndarray) -> np.ndarray:
    """Cut positions that never split a run of tied scores."""
    n = len(sorted_scores)
    ok = np.ones(n + 1, dtype=bool)
    if n > 1:
        ok[1:n] = sorted_scores[1:] != sorted_scores[:-1]
    return ok


def _predictions_for_positions(positions, n: int) -> np.ndarray:
    pos = np.asarray(positions, dtype=np.int64)
    ranks = np.arange(1, n + 1)
    return (1 + np.searchsorted(pos, ranks, side="left")).astype(np.int64)


def _theta_from_positions(sorted_scores: np.ndarray, positions) -> np.ndarray:
    """Threshold values realizing the given cuts.

    Midpoints between neighbouring scores, except where rounding would push
    the midpoint onto the upper score; then the lower score itself is used
    (scores equal to a threshold fall in the lower bin).
    """
    n = len(sorted_scores)
    out = np.empty(len(positions), dtype=float)
    for t, p in enumerate(positions):
        if p == 0:
            v = sorted_scores[0] - 1.0
            out[t] = v if v < sorted_scores[0] else np.nextafter(sorted_scores[0], -np.inf)
        elif p == n:
            out[t] = sorted_scores[-1] + 1.0
        else:
            lo, hi = sorted_scores[p - 1], sorted_scores[p]
            mid = 0.5 * (lo + hi)
            out[t] = mid if mid < hi else lo
    return out


def _cost_prefix(sorted_labels: np.ndarray, cost_matrix: CostMatrix) -> np.ndarray:
    """S[i, l] = total cost of predicting l+1 for the first i sorted points."""
    n = len(sorted_labels)
    k = cost_matrix.num_classes
    S = np.zeros((n + 1, k))
    S[1:] = np.cumsum(cost_matrix.values[sorted_labels - 1], axis=0)
    return S


def _positions_from_segments(segments, k: int) -> tuple[int, ...]:
    counts = [0] * (k + 1)
    for start, end, label in segments:
        counts[label] += end - start
    acc = 0
    positions = []
    for lab in range(1, k):
        acc += counts[lab]
        positions.append(acc)
    return tuple(positions)


def _solution_from_positions(sorted_scores, sorted_labels, sorted_attrs, positions,
                             config: ThresholdObjectiveConfig) -> ThresholdSolution:
    n = len(sorted_scores)
    k = config.cost_matrix.num_classes
    preds = _predictions_for_positions(positions, n)
    cost = expected_cost(sorted_labels, preds, config.cost_matrix)
    if config.notion is FairnessNotion.PAIRWISE_DP:
        report = pairwise_dp_viol(sorted_attrs, preds, num_classes=k)
    else:
        report = pairwise_eo_viol(sorted_attrs, sorted_labels, preds, num_classes=k)
    value = cost + config.lam * report.violation
    theta = Thresholds(_theta_from_positions(sorted_scores, positions))
    return ThresholdSolution(thresholds=theta, positions=tuple(int(p) for p in positions),
                             objective=value, cost=cost, violation=report.violation)


def _running_min(values: np.ndarray):
    """Prefix minima with the index of the first achiever."""
    best = np.minimum.accumulate(values)
    prev = np.concatenate(([np.inf], best[:-1]))
    new = values < prev
    arg = np.where(new, np.arange(len(values)), -1)
    return best, np.maximum.accumulate(arg)


# ---------------------------------------------------------------------------
# cost-only dynamic program


def cost_only_dp(scores, labels, cost_matrix: CostMatrix) -> CostOnlySolution:
    """Cost-minimal monotone labeling of the scores, O(n k^2).

    States are (points consumed, segments used, label of the last segment);
    cuts inside a run of tied scores are never considered.
    """
    k = cost_matrix.num_classes
    scores, labels, _ = _check_inputs(scores, labels, k)
    order = np.argsort(scores, kind="stable")
    s, y = scores[order], labels[order]
    n = len(s)
    ok = _feasible_cuts(s)
    S = _cost_prefix(y, cost_matrix)

    T = np.full((n + 1, k, k), np.inf)
    T[0] = 0.0
    T[1:, 0, :] = S[1:, :]
    T[1:, :, 0] = S[1:, 0][:, None]
    par_i = np.full((n + 1, k, k), -1, dtype=np.int32)
    par_l = np.full((n + 1, k, k), -1, dtype=np.int32)

    for f in range(1, k):
        plane = T[:, f - 1, :]
        best_l = np.minimum.accumulate(plane, axis=1)
        arg_l = np.zeros((n + 1, k), dtype=np.int32)
        run = plane[:, 0].copy()
        for l in range(1, k):
            better = plane[:, l] < run
            run = np.where(better, plane[:, l], run)
            arg_l[:, l] = np.where(better, l, arg_l[:, l - 1])
        for l in range(1, k):
            cand = np.where(ok, best_l[:, l - 1] - S[:, l], np.inf)
            run_v, run_a = _running_min(cand[:-1])
            T[1:, f, l] = S[1:, l] + run_v
            par_i[1:, f, l] = run_a
            par_l[1:, f, l] = arg_l[run_a, l - 1]

    final = T[n, k - 1, :]
    best_label = int(np.argmin(final))
    raw = float(final[best_label])

    segments = []
    i, f, l = n, k - 1, best_label
    while i > 0:
        pi = int(par_i[i, f, l])
        if f == 0 or l == 0 or pi < 0:
            segments.append((0, i, l + 1))
            break
        pl = int(par_l[i, f, l])
        segments.append((pi, i, l + 1))
        i, f, l = pi, f - 1, pl
    segments.reverse()

    positions = _positions_from_segments(segments, k)
    theta = Thresholds(_theta_from_positions(s, positions))
    return CostOnlySolution(thresholds=theta, positions=positions, cost=raw / n)


# ---------------------------------------------------------------------------
# exact dynamic programs over pair-count balances (two groups)


def _two_group_or_raise(attrs: np.ndarray):
    present = np.unique(attrs)
    if not np.array_equal(present, np.array([0, 1])):
        raise DataError("the exact solver handles exactly two populated groups (ids 0 and 1)")


def _shifted(vec: np.ndarray, d: int, fill) -> np.ndarray:
    out = np.full_like(vec, fill)
    if d == 0:
        out[:] = vec
    elif d > 0:
        out[d:] = vec[:-d] if d < len(vec) else out[d:]
    else:
        out[:d] = vec[-d:]
    return out


def _shifted2(plane: np.ndarray, d1: int, d2: int, fill) -> np.ndarray:
    out = np.full_like(plane, fill)
    r, c = plane.shape
    if d1 < r and d2 < c:
        out[d1:, d2:] = plane[: r - d1, : c - d2]
    return out


def exact_dp(scores, labels, attrs, config: ThresholdObjectiveConfig, *,
             max_points_parity: int = 40, max_points_ordered: int = 25) -> ThresholdSolution:
    """Provably optimal thresholds for two groups on small inputs.

    The state space carries the running cross-group comparison balance, so
    table size grows with the square (parity) or fourth power (label
    conditioned) of the input; the guards fail fast instead of thrashing.
    """
    k = config.cost_matrix.num_classes
    scores, labels, attrs = _check_inputs(scores, labels, k, attrs)
    _two_group_or_raise(attrs)
    n = len(scores)
    limit = max_points_parity if config.notion is FairnessNotion.PAIRWISE_DP else max_points_ordered
    if n > limit:
        raise GuardError(f"exact_dp is gated to n <= {limit} for "
                         f"{config.notion.value} (got n = {n})")
    order = np.argsort(scores, kind="stable")
    s, y, a = scores[order], labels[order], attrs[order]
    ok = _feasible_cuts(s)
    S = _cost_prefix(y, config.cost_matrix)
    if config.notion is FairnessNotion.PAIRWISE_DP:
        positions = _exact_parity(s, y, a, ok, S, k, config.lam)
    else:
        positions = _exact_ordered(s, y, a, ok, S, k, config.lam)
    return _solution_from_positions(s, y, a, positions, config)


def _exact_parity(s, y, a, ok, S, k, lam):
    n = len(s)
    cg = np.concatenate(([0], np.cumsum(a == 0)))
    ch = np.concatenate(([0], np.cumsum(a == 1)))
    den = int(cg[n]) * int(ch[n])
    width = 2 * den + 1
    off = den

    T = np.full((n + 1, k, k, width), np.inf)
    T[0, :, :, off] = 0.0
    T[1:, 0, :, off] = S[1:, :]
    T[1:, :, 0, off] = S[1:, 0][:, None]
    par_i = np.full((n + 1, k, k, width), -1, dtype=np.int32)
    par_l = np.full((n + 1, k, k, width), -1, dtype=np.int32)

    def delta(ip, i):
        # new segment is (ip, i]; its predictions exceed everything before
        fwd = (int(cg[i]) - int(cg[ip])) * int(ch[ip])
        bwd = (int(ch[i]) - int(ch[ip])) * int(cg[ip])
        return fwd - bwd

    for f in range(1, k):
        best_l = np.minimum.accumulate(T[:, f - 1], axis=1)
        arg_l = np.zeros((n + 1, k, width), dtype=np.int32)
        run = T[:, f - 1, 0].copy()
        for l in range(1, k):
            better = T[:, f - 1, l] < run
            run = np.where(better, T[:, f - 1, l], run)
            arg_l[:, l] = np.where(better, l, arg_l[:, l - 1])
        for l in range(1, k):
            for i in range(1, n + 1):
                acc = T[i, f, l]
                api = par_i[i, f, l]
                apl = par_l[i, f, l]
                for ip in range(i):
                    if not ok[ip]:
                        continue
                    d = delta(ip, i)
                    cand = _shifted(best_l[ip, l - 1], d, np.inf) + (S[i, l] - S[ip, l])
                    upd = cand < acc
                    if upd.any():
                        acc[upd] = cand[upd]
                        api[upd] = ip
                        apl[upd] = _shifted(arg_l[ip, l - 1], d, -1)[upd]

    balance = np.arange(width) - off
    gap = np.abs(balance.astype(float)) / float(den)
    vals = T[n, k - 1] / n + lam * gap[None, :]
    flat = int(np.argmin(vals))
    best_label, vi = divmod(flat, width)

    segments = []
    i, f, l = n, k - 1, best_label
    while i > 0:
        pi = int(par_i[i, f, l, vi])
        if f == 0 or l == 0 or pi < 0:
            segments.append((0, i, l + 1))
            break
        pl = int(par_l[i, f, l, vi])
        segments.append((pi, i, l + 1))
        vi -= delta(pi, i)
        i, f, l = pi, f - 1, pl
    segments.reverse()
    return _positions_from_segments(segments, k)


def _exact_ordered(s, y, a, ok, S, k, lam):
    n = len(s)
    onehot = np.zeros((n, k), dtype=np.int64)
    onehot[np.arange(n), y - 1] = 1
    gy = np.zeros((n + 1, k), dtype=np.int64)
    hy = np.zeros((n + 1, k), dtype=np.int64)
    gy[1:] = np.cumsum(onehot * (a == 0)[:, None], axis=0)
    hy[1:] = np.cumsum(onehot * (a == 1)[:, None], axis=0)
    hy_inc = np.cumsum(hy, axis=1)
    hy_lt = hy_inc - hy  # labels strictly below
    hy_gt = hy_inc[:, -1:] - hy_inc  # labels strictly above
    lt_tab = gy @ hy_gt.T  # lt_tab[i, j] = #(g <= i, h <= j, y_g < y_h)
    gt_tab = gy @ hy_lt.T

    n_gt = int(gt_tab[n, n])
    n_lt = int(lt_tab[n, n])
    if n_gt == 0 or n_lt == 0:
        raise DataError("label-conditioned violation is undefined: one comparison "
                        "direction has no cross-group pairs")

    w1, w2 = n_gt + 1, n_lt + 1
    T = np.full((n + 1, k, k, w1, w2), np.inf)
    T[0, :, :, 0, 0] = 0.0
    # a single segment gives every point the same prediction: no strict pairs
    T[1:, 0, :, 0, 0] = S[1:, :]
    T[1:, :, 0, 0, 0] = S[1:, 0][:, None]
    par_i = np.full((n + 1, k, k, w1, w2), -1, dtype=np.int32)
    par_l = np.full((n + 1, k, k, w1, w2), -1, dtype=np.int32)

    def deltas(ip, i):
        dp_ = int(gt_tab[i, ip]) - int(gt_tab[ip, ip])  # new g over old h, y_g > y_h
        dq_ = int(lt_tab[ip, i]) - int(lt_tab[ip, ip])  # old g under new h, y_g < y_h
        return dp_, dq_

    for f in range(1, k):
        best_l = np.minimum.accumulate(T[:, f - 1], axis=1)
        arg_l = np.zeros((n + 1, k, w1, w2), dtype=np.int32)
        run = T[:, f - 1, 0].copy()
        for l in range(1, k):
            better = T[:, f - 1, l] < run
            run = np.where(better, T[:, f - 1, l], run)
            arg_l[:, l] = np.where(better, l, arg_l[:, l - 1])
        for l in range(1, k):
            for i in range(1, n + 1):
                acc = T[i, f, l]
                api = par_i[i, f, l]
                apl = par_l[i, f, l]
                for ip in range(i):
                    if not ok[ip]:
                        continue
                    d1, d2 = deltas(ip, i)
                    cand = _shifted2(best_l[ip, l - 1], d1, d2, np.inf) + (S[i, l] - S[ip, l])
                    upd = cand < acc
                    if upd.any():
                        acc[upd] = cand[upd]
                        api[upd] = ip
                        apl[upd] = _shifted2(arg_l[ip, l - 1], d1, d2, -1)[upd]

    p_grid = np.arange(w1, dtype=float)[:, None]
    q_grid = np.arange(w2, dtype=float)[None, :]
    if n_gt == n_lt:
        gap = np.abs(p_grid - q_grid) / float(n_gt)
    else:
        gap = np.abs(p_grid / float(n_gt) - q_grid / float(n_lt))
    vals = T[n, k - 1] / n + lam * gap[None, :, :]
    flat = int(np.argmin(vals))
    best_label, rest = divmod(flat, w1 * w2)
    vp, vq = divmod(rest, w2)

    segments = []
    i, f, l = n, k - 1, best_label
    while i > 0:
        pi = int(par_i[i, f, l, vp, vq])
        if f == 0 or l == 0 or pi < 0:
            segments.append((0, i, l + 1))
            break
        pl = int(par_l[i, f, l, vp, vq])
        segments.append((pi, i, l + 1))
        d1, d2 = deltas(pi, i)
        vp -= d1
        vq -= d2
        i, f, l = pi, f - 1, pl
    segments.reverse()
    return _positions_from_segments(segments, k)


# ---------------------------------------------------------------------------
# local search over unit threshold moves


@dataclass(frozen=True)
class TraceEntry:
    move_index: int
    threshold: int
    position: int
    objective: float


@dataclass(frozen=True)
class RestartOutcome:
    initial_objective: float
    objective: float
    moves: int
    converged: bool
    positions: tuple[int, ...]
    trace: tuple[TraceEntry, ...] = field(default=())


@dataclass(frozen=True)
class LocalSearchResult:
    thresholds: Thresholds
    positions: tuple[int, ...]
    objective: float
    cost: float
    violation: float
    best_restart: int
    outcomes: tuple[RestartOutcome, ...]


class _Problem:
    """Immutable per-call context for the sweep state."""

    __slots__ = ("n", "k", "num_groups", "notion", "lam", "y", "a", "ok",
                 "cost_rows", "den_fwd", "valid_pairs", "labeled")

    def __init__(self, sorted_scores, sorted_labels, sorted_attrs,
                 config: ThresholdObjectiveConfig, num_groups: int):
        self.n = len(sorted_scores)
        self.k = config.cost_matrix.num_classes
        self.num_groups = num_groups
        self.notion = config.notion
        self.lam = config.lam
        self.y = [int(v) for v in sorted_labels]
        self.a = [int(v) for v in sorted_attrs]
        self.ok = _feasible_cuts(sorted_scores)
        self.cost_rows = [[float(v) for v in row] for row in config.cost_matrix.values]
        self.labeled = config.notion is FairnessNotion.PAIRWISE_EO

        counts = np.zeros((num_groups, self.k), dtype=np.int64)
        np.add.at(counts, (sorted_attrs, sorted_labels - 1), 1)
        if self.labeled:
            lab_below = np.cumsum(counts, axis=1) - counts
            den = counts @ lab_below.T  # den[g, h] = #(y_g > y_h) cross pairs
        else:
            totals = counts.sum(axis=1)
            den = np.outer(totals, totals)
        self.den_fwd = [[int(v) for v in row] for row in den]
        self.valid_pairs = [(g, h)
                            for g in range(num_groups) for h in range(num_groups)
                            if g != h and den[g, h] > 0 and den[h, g] > 0]
        if num_groups >= 2 and not self.valid_pairs:
            raise DataError(f"{config.notion.value} violation is undefined on this data")


class _SweepState:
    """Pair-count tables for one placement, priced for unit moves.

    Occupancy and comparison counters are plain ints, so walking a
    threshold one position costs O(|A|) (parity) or O(k |A|) (label
    conditioned) and stays exact.  The running cost total is float; with
    integer-valued cost menus it is exact as well.
    """

    __slots__ = ("prob", "pos", "occ", "fwd", "cost_sum")

    def __init__(self, prob, pos, occ, fwd, cost_sum):
        self.prob = prob
        self.pos = pos
        self.occ = occ
        self.fwd = fwd
        self.cost_sum = cost_sum

    @classmethod
    def from_positions(cls, prob: _Problem, positions) -> "_SweepState":
        n, k, ng = prob.n, prob.k, prob.num_groups
        pos = [int(p) for p in positions]
        preds = _predictions_for_positions(pos, n)
        bins = preds - 1
        a_np = np.asarray(prob.a)
        y_np = np.asarray(prob.y)
        if prob.labeled:
            occ_np = np.zeros((k, k, ng), dtype=np.int64)
            np.add.at(occ_np, (bins, y_np - 1, a_np), 1)
            cells = np.transpose(occ_np, (2, 1, 0))  # (group, label, bin)
            fwd_np, _ = _label_order_counts(cells)
            occ = [[[int(c) for c in row] for row in plane] for plane in occ_np]
        else:
            occ_np = np.zeros((k, ng), dtype=np.int64)
            np.add.at(occ_np, (bins, a_np), 1)
            cells = occ_np.T
            below = np.cumsum(cells, axis=1) - cells
            fwd_np = cells @ below.T
            occ = [[int(c) for c in row] for row in occ_np]
        np.fill_diagonal(fwd_np, 0)
        fwd = [[int(c) for c in row] for row in fwd_np]
        cost_sum = float(np.sum(np.asarray(prob.cost_rows)[y_np - 1, bins]))
        return cls(prob, pos, occ, fwd, cost_sum)

    def copy(self) -> "_SweepState":
        if self.prob.labeled:
            occ = [[row[:] for row in plane] for plane in self.occ]
        else:
            occ = [row[:] for row in self.occ]
        fwd = [row[:] for row in self.fwd]
        return _SweepState(self.prob, self.pos[:], occ, fwd, self.cost_sum)

    def objective(self) -> float:
        prob = self.prob
        viol = 0.0
        for g, h in prob.valid_pairs:
            gap = pair_gap_value(self.fwd[g][h], prob.den_fwd[g][h],
                                 self.fwd[h][g], prob.den_fwd[h][g])
            if gap > viol:
                viol = gap
        return self.cost_sum / prob.n + prob.lam * viol

    def step_right(self, t: int):
        prob = self.prob
        mover = self.pos[t]
        g = prob.a[mover]
        ym = prob.y[mover]
        lo, hi = t, t + 1
        if prob.labeled:
            occ_lo, occ_hi = self.occ[lo], self.occ[hi]
            for h in range(prob.num_groups):
                if h == g:
                    continue
                self.fwd[g][h] -= sum(occ_lo[yy][h] for yy in range(ym - 1))
                self.fwd[h][g] += sum(occ_hi[yy][h] for yy in range(ym, prob.k))
            occ_lo[ym - 1][g] += 1
            occ_hi[ym - 1][g] -= 1
        else:
            occ_lo, occ_hi = self.occ[lo], self.occ[hi]
            for h in range(prob.num_groups):
                if h == g:
                    continue
                self.fwd[g][h] -= occ_lo[h]
                self.fwd[h][g] += occ_hi[h]
            occ_lo[g] += 1
            occ_hi[g] -= 1
        self.cost_sum += prob.cost_rows[ym - 1][lo] - prob.cost_rows[ym - 1][hi]
        self.pos[t] = mover + 1

    def step_left(self, t: int):
        prob = self.prob
        mover = self.pos[t] - 1
        g = prob.a[mover]
        ym = prob.y[mover]
        lo, hi = t, t + 1
        if prob.labeled:
            occ_lo, occ_hi = self.occ[lo], self.occ[hi]
            for h in range(prob.num_groups):
                if h == g:
                    continue
                self.fwd[g][h] += sum(occ_lo[yy][h] for yy in range(ym - 1))
                self.fwd[h][g] -= sum(occ_hi[yy][h] for yy in range(ym, prob.k))
            occ_lo[ym - 1][g] -= 1
            occ_hi[ym - 1][g] += 1
        else:
            occ_lo, occ_hi = self.occ[lo], self.occ[hi]
            for h in range(prob.num_groups):
                if h == g:
                    continue
                self.fwd[g][h] += occ_lo[h]
                self.fwd[h][g] -= occ_hi[h]
            occ_lo[g] -= 1
            occ_hi[g] += 1
        self.cost_sum += prob.cost_rows[ym - 1][hi] - prob.cost_rows[ym - 1][lo]
        self.pos[t] = mover


def _sweep(state: _SweepState):
    """Best single-threshold move: (key, target, snapshot) or None.

    Keys order by objective, then threshold index, then leftward before
    rightward, then nearest target, which pins the accepted move when
    objectives tie.
    """
    prob = state.prob
    n, k = prob.n, prob.k
    best = None
    for t in range(k - 1):
        start = state.pos[t]
        hi_lim = state.pos[t + 1] if t + 1 < k - 1 else n
        lo_lim = state.pos[t - 1] if t > 0 else 0
        scratch = state.copy()
        for q in range(start + 1, hi_lim + 1):
            scratch.step_right(t)
            if prob.ok[q]:
                key = (scratch.objective(), t, 1, q - start)
                if best is None or key < best[0]:
                    best = (key, q, scratch.copy())
        scratch = state.copy()
        for q in range(start - 1, lo_lim - 1, -1):
            scratch.step_left(t)
            if prob.ok[q]:
                key = (scratch.objective(), t, 0, start - q)
                if best is None or key < best[0]:
                    best = (key, q, scratch.copy())
    return best


def _draw_positions(rng: np.random.Generator, feasible: np.ndarray, m: int) -> list[int]:
    if len(feasible) >= m:
        picks = rng.choice(len(feasible), size=m, replace=False)
    else:
        picks = rng.choice(len(feasible), size=m, replace=True)
    return sorted(int(feasible[p]) for p in picks)


def _check_state(state: _SweepState):
    rebuilt = _SweepState.from_positions(state.prob, state.pos)
    if state.occ != rebuilt.occ or state.fwd != rebuilt.fwd:
        raise AssertionError("incremental sweep tables diverged from a rebuild")
    if abs(state.cost_sum - rebuilt.cost_sum) > 1e-9 * max(1.0, abs(rebuilt.cost_sum)):
        raise AssertionError("incremental cost total diverged from a rebuild")


def local_search(scores, labels, attrs, config: ThresholdObjectiveConfig, *,
                 collect_trace: bool = False,
                 check_invariants: bool = False) -> LocalSearchResult:
    """Steepest-descent threshold walking with seeded restarts.

    Each sweep prices every unit move of every threshold inside its
    neighbours' range and applies the best strict improvement; a restart
    ends when no move improves or the iteration cap (10 n k by default)
    is hit.  ``init_policy="cost_only_dp"`` seeds the first restart from
    the cost-minimal placement; every other start is drawn uniformly from
    the feasible cuts under ``default_rng([seed, restart])``.
    """
    k = config.cost_matrix.num_classes
    scores, labels, attrs = _check_inputs(scores, labels, k, attrs)
    num_groups = int(attrs.max()) + 1
    order = np.argsort(scores, kind="stable")
    s, y, a = scores[order], labels[order], attrs[order]
    n = len(s)
    prob = _Problem(s, y, a, config, num_groups)
    feasible = np.flatnonzero(prob.ok)
    cap = config.max_iterations if config.max_iterations is not None else 10 * n * k
    seeded = None
    if config.init_policy == "cost_only_dp":
        seeded = list(cost_only_dp(scores, labels, config.cost_matrix).positions)

    outcomes = []
    best = None  # (objective, restart index, positions)
    for r in range(config.restarts):
        rng = np.random.default_rng([config.seed, r])
        if seeded is not None and r == 0:
            pos0 = seeded[:]
        else:
            pos0 = _draw_positions(rng, feasible, k - 1)
        state = _SweepState.from_positions(prob, pos0)
        cur = state.objective()
        initial = cur
        trace = []
        moves = 0
        converged = False
        while moves < cap:
            found = _sweep(state)
            if found is None or not found[0][0] < cur:
                converged = True
                break
            key, target, snapshot = found
            state = snapshot
            moves += 1
            cur = state.objective()
            if check_invariants:
                _check_state(state)
            if collect_trace:
                trace.append(TraceEntry(moves, key[1], target, cur))
        outcomes.append(RestartOutcome(initial_objective=initial, objective=cur,
                                       moves=moves, converged=converged,
                                       positions=tuple(state.pos),
                                       trace=tuple(trace)))
        if best is None or cur < best[0]:
            best = (cur, r, tuple(state.pos))

    final = _SweepState.from_positions(prob, best[2])
    viol = 0.0
    for g, h in prob.valid_pairs:
        gap = pair_gap_value(final.fwd[g][h], prob.den_fwd[g][h],
                             final.fwd[h][g], prob.den_fwd[h][g])
        viol = gap if gap > viol else viol
    theta = Thresholds(_theta_from_positions(s, best[2]))
    return LocalSearchResult(thresholds=theta, positions=best[2],
                             objective=final.objective(), cost=final.cost_sum / n,
                             violation=viol, best_restart=best[1],
                             outcomes=tuple(outcomes))


# ---------------------------------------------------------------------------
# exhaustive reference


def brute_force_thresholds(scores, labels, attrs, config: ThresholdObjectiveConfig, *,
                           max_candidates: int = 2_000_000) -> ThresholdSolution:
    """Enumerate every feasible cut vector; first minimum wins ties."""
    k = config.cost_matrix.num_classes
    scores, labels, attrs = _check_inputs(scores, labels, k, attrs)
    order = np.argsort(scores, kind="stable")
    s, y, a = scores[order], labels[order], attrs[order]
    feasible = np.flatnonzero(_feasible_cuts(s)).tolist()
    total = comb(len(feasible) + k - 2, k - 1)
    if total > max_candidates:
        raise GuardError(f"enumeration would visit {total} cut vectors "
                         f"(cap {max_candidates})")
    best = None
    for combo in itertools.combinations_with_replacement(feasible, k - 1):
        sol = _solution_from_positions(s, y, a, combo, config)
        if best is None or sol.objective < best.objective:
            best = sol
    return best

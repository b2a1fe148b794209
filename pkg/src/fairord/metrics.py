"""Fairness violation measures and cost metrics for ordinal predictors.

Pairwise criteria compare two independent draws. Empirically that means all
n^2 ordered index pairs, the diagonal included; diagonal pairs never satisfy
a strict comparison, so they only widen denominators. Every measure comes in
two routes: a fast counting implementation built on per-group histograms
(O(n + k|A|^2) for demographic parity, O(n + k^2 |A|^2) for equal
opportunity) and a naive O(n^2) oracle that walks every pair. Both do all
arithmetic on integer counts and divide exactly once, so they agree to the
bit, not within a tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    CostMatrix,
    DataError,
    Dataset,
    FairnessNotion,
    LinearScorer,
    Thresholds,
)

__all__ = [
    "pair_gap_value",
    "PairGap",
    "FairnessReport",
    "GroupStats",
    "expected_cost",
    "pairwise_dp_viol",
    "pairwise_eo_viol",
    "pairwise_eqodds_viol",
    "pairwise_dp_viol_oracle",
    "pairwise_eo_viol_oracle",
    "pairwise_eqodds_viol_oracle",
    "scorer_dp_viol",
    "scorer_eo_viol",
    "standard_viol",
    "margin_loss",
    "group_stats",
    "dp_report_from_cells",
    "eo_report_from_cells",
    "eqodds_report_from_cells",
]


@dataclass(frozen=True)
class PairGap:
    """Forward/backward comparison probabilities for one ordered group pair.

    For the equalized-odds style criterion `diff` is the worse of the strict
    and the non-strict gap, and the non-strict probabilities are carried in
    the `*_weak` fields; everywhere else diff is the forward/backward gap.
    Gaps over a shared denominator divide the count difference once (see
    pair_gap_value), so diff can differ from |forward - backward| in the
    last bit.
    """

    group_a: int
    group_b: int
    forward: float
    backward: float
    diff: float
    valid: bool
    forward_count: int = 0
    forward_total: int = 0
    backward_count: int = 0
    backward_total: int = 0
    forward_weak: float = float("nan")
    backward_weak: float = float("nan")

    def to_json_dict(self) -> dict:
        out = {
            "a1": self.group_a,
            "a2": self.group_b,
            "forward": self.forward,
            "backward": self.backward,
            "diff": self.diff,
            "valid": self.valid,
            "forward_count": int(self.forward_count),
            "forward_total": int(self.forward_total),
            "backward_count": int(self.backward_count),
            "backward_total": int(self.backward_total),
        }
        if self.forward_weak == self.forward_weak:  # only when populated
            out["forward_weak"] = self.forward_weak
            out["backward_weak"] = self.backward_weak
        return out


@dataclass(frozen=True)
class FairnessReport:
    """Violation = max gap over the valid ordered group pairs."""

    notion: FairnessNotion
    per_pair: tuple[PairGap, ...]
    violation: float
    skipped_pairs: tuple[tuple[int, int], ...]

    def to_json_dict(self) -> dict:
        return {
            "notion": self.notion.value,
            "violation": self.violation,
            "pairs": [p.to_json_dict() for p in self.per_pair],
            "skipped": [list(p) for p in self.skipped_pairs],
        }


@dataclass(frozen=True)
class GroupStats:
    """Group masses and cross-group label-order probabilities."""

    group_probs: np.ndarray
    pair_rows: tuple[dict, ...]

    def to_json_dict(self) -> dict:
        return {
            "group_probs": [float(p) for p in self.group_probs],
            "pairs": [dict(r) for r in self.pair_rows],
        }


def _as_int_vector(values, name: str) -> np.ndarray:
    out = np.asarray(values, dtype=np.int64).reshape(-1)
    if out.size == 0:
        raise DataError(f"{name} must be non-empty")
    return out


def _infer_groups(attrs: np.ndarray, num_groups: int | None) -> int:
    inferred = int(attrs.max()) + 1
    if num_groups is None:
        return inferred
    if inferred > num_groups:
        raise DataError("group id exceeds the declared number of groups")
    return int(num_groups)


def _infer_classes(num_classes: int | None, *vectors) -> int:
    hi = max(int(v.max()) for v in vectors if v is not None)
    lo = min(int(v.min()) for v in vectors if v is not None)
    if lo < 1:
        raise DataError("ordinal values must be >= 1")
    if num_classes is None:
        return hi
    if hi > num_classes:
        raise DataError("ordinal value exceeds the declared number of classes")
    return int(num_classes)


def _dp_cells(attrs, values, num_groups, num_values) -> np.ndarray:
    cells = np.zeros((num_groups, num_values), dtype=np.int64)
    np.add.at(cells, (attrs, values - 1), 1)
    return cells


def _eo_cells(attrs, labels, values, num_groups, num_labels, num_values) -> np.ndarray:
    cells = np.zeros((num_groups, num_labels, num_values), dtype=np.int64)
    np.add.at(cells, (attrs, labels - 1, values - 1), 1)
    return cells


def _finish_report(notion, pairs, num_groups) -> FairnessReport:
    valid = [p for p in pairs if p.valid]
    skipped = tuple((p.group_a, p.group_b) for p in pairs if not p.valid)
    if num_groups >= 2 and pairs and not valid:
        raise DataError(f"{notion.value} violation is undefined: no group pair has "
                        "both comparison events populated")
    violation = max((p.diff for p in valid), default=0.0)
    return FairnessReport(
        notion=notion,
        per_pair=tuple(pairs),
        violation=violation,
        skipped_pairs=skipped,
    )


def pair_gap_value(fwd_count, fwd_total, bwd_count, bwd_total) -> float:
    """Gap between two conditional probabilities given as count ratios.

    Shared denominators divide once, on the count difference, so the result
    of search procedures that track only the difference is bit-identical.
    """
    if fwd_total == bwd_total:
        return abs(float(fwd_count) - float(bwd_count)) / float(fwd_total)
    return abs(float(fwd_count) / float(fwd_total)
               - float(bwd_count) / float(bwd_total))


def dp_report_from_cells(cells: np.ndarray) -> FairnessReport:
    """Demographic-parity report from a (groups x values) occupancy table.

    Works on integer counts (empirical data) and on float masses (a finite
    population), since both reduce to sums of products of cell weights.
    """
    cells = np.asarray(cells)
    num_groups = cells.shape[0]
    totals = cells.sum(axis=1)
    below = np.cumsum(cells, axis=1) - cells  # strictly smaller values
    fwd = cells @ below.T  # fwd[a, b] = #(v_a > v_b) pairs
    pairs = []
    for a in range(num_groups):
        for b in range(num_groups):
            if a == b:
                continue
            denom = totals[a] * totals[b]
            if denom > 0:
                forward = float(fwd[a, b]) / float(denom)
                backward = float(fwd[b, a]) / float(denom)
                diff = pair_gap_value(fwd[a, b], denom, fwd[b, a], denom)
                pairs.append(PairGap(a, b, forward, backward, diff,
                                     True, int(fwd[a, b]) if cells.dtype.kind == "i" else 0,
                                     int(denom) if cells.dtype.kind == "i" else 0,
                                     int(fwd[b, a]) if cells.dtype.kind == "i" else 0,
                                     int(denom) if cells.dtype.kind == "i" else 0))
            else:
                pairs.append(PairGap(a, b, float("nan"), float("nan"), float("nan"), False))
    return _finish_report(FairnessNotion.PAIRWISE_DP, pairs, num_groups)


def _label_order_counts(cells3: np.ndarray):
    """Cross tables used by the label-conditioned criteria.

    Returns (fwd, denom_fwd, bwd, denom_bwd) where fwd[a, b] counts ordered
    pairs with v_a > v_b and y_a > y_b, and denom_fwd[a, b] counts y_a > y_b.
    """
    cells3 = np.asarray(cells3)
    # S[b, y, v] = sum of cells3[b, y' < y, v' < v]
    cum = np.cumsum(np.cumsum(cells3, axis=1), axis=2)
    below = np.zeros_like(cum)
    below[:, 1:, 1:] = cum[:, :-1, :-1]
    fwd = np.einsum("ayv,byv->ab", cells3, below)
    label_totals = cells3.sum(axis=2)
    lab_below = np.cumsum(label_totals, axis=1) - label_totals
    denom_fwd = label_totals @ lab_below.T
    return fwd, denom_fwd


def eo_report_from_cells(cells3: np.ndarray) -> FairnessReport:
    """Equal-opportunity report from a (groups x labels x values) table."""
    cells3 = np.asarray(cells3)
    num_groups = cells3.shape[0]
    fwd, denom_fwd = _label_order_counts(cells3)
    pairs = []
    for a in range(num_groups):
        for b in range(num_groups):
            if a == b:
                continue
            df, db = denom_fwd[a, b], denom_fwd[b, a]
            if df > 0 and db > 0:
                forward = float(fwd[a, b]) / float(df)
                backward = float(fwd[b, a]) / float(db)
                diff = pair_gap_value(fwd[a, b], df, fwd[b, a], db)
                is_int = cells3.dtype.kind == "i"
                pairs.append(PairGap(a, b, forward, backward, diff,
                                     True, int(fwd[a, b]) if is_int else 0,
                                     int(df) if is_int else 0,
                                     int(fwd[b, a]) if is_int else 0,
                                     int(db) if is_int else 0))
            else:
                pairs.append(PairGap(a, b, float("nan"), float("nan"), float("nan"), False))
    return _finish_report(FairnessNotion.PAIRWISE_EO, pairs, num_groups)


def eqodds_report_from_cells(cells3: np.ndarray) -> FairnessReport:
    """Pairwise equalized odds: the strict gap and its non-strict companion.

    The non-strict comparison requires P[v1 <= v2 | y1 <= y2] to match
    P[v1 >= v2 | y1 >= y2] across the group pair; the reported diff is the
    worse of the strict and non-strict gaps.
    """
    cells3 = np.asarray(cells3)
    num_groups = cells3.shape[0]
    fwd, denom_fwd = _label_order_counts(cells3)

    # at_most[b, y, v] = sum of cells3[b, y' <= y, v' <= v]
    at_most = np.cumsum(np.cumsum(cells3, axis=1), axis=2)
    weak_le = np.einsum("ayv,byv->ba", cells3, at_most)  # #(v_a >= v_b, y_a >= y_b)
    label_totals = cells3.sum(axis=2)
    lab_at_most = np.cumsum(label_totals, axis=1)
    denom_ge = np.einsum("ay,by->ba", label_totals, lab_at_most)  # #(y_a >= y_b)

    pairs = []
    is_int = cells3.dtype.kind == "i"
    for a in range(num_groups):
        for b in range(num_groups):
            if a == b:
                continue
            df, db = denom_fwd[a, b], denom_fwd[b, a]
            if df > 0 and db > 0:
                forward = float(fwd[a, b]) / float(df)
                backward = float(fwd[b, a]) / float(db)
                strict_gap = pair_gap_value(fwd[a, b], df, fwd[b, a], db)
                # weak forward: P[v_a <= v_b | y_a <= y_b] for the (a, b) pair
                fwd_weak = float(weak_le[a, b]) / float(denom_ge[a, b])
                bwd_weak = float(weak_le[b, a]) / float(denom_ge[b, a])
                weak_gap = pair_gap_value(weak_le[a, b], denom_ge[a, b],
                                          weak_le[b, a], denom_ge[b, a])
                pairs.append(PairGap(a, b, forward, backward,
                                     max(strict_gap, weak_gap), True,
                                     int(fwd[a, b]) if is_int else 0,
                                     int(df) if is_int else 0,
                                     int(fwd[b, a]) if is_int else 0,
                                     int(db) if is_int else 0,
                                     fwd_weak, bwd_weak))
            else:
                pairs.append(PairGap(a, b, float("nan"), float("nan"), float("nan"), False))
    report = _finish_report(FairnessNotion.PAIRWISE_EO, pairs, num_groups)
    return FairnessReport(FairnessNotion.PAIRWISE_EQ_ODDS, report.per_pair,
                          report.violation, report.skipped_pairs)


def pairwise_dp_viol(attrs, predictions, num_classes: int | None = None,
                     num_groups: int | None = None) -> FairnessReport:
    """Max over group pairs of |P[f1 > f2 | a1, a2] - P[f1 < f2 | a1, a2]|."""
    attrs = _as_int_vector(attrs, "attrs")
    predictions = _as_int_vector(predictions, "predictions")
    if attrs.shape != predictions.shape:
        raise DataError("attrs and predictions must have matching length")
    groups = _infer_groups(attrs, num_groups)
    k = _infer_classes(num_classes, predictions)
    return dp_report_from_cells(_dp_cells(attrs, predictions, groups, k))


def pairwise_eo_viol(attrs, labels, predictions, num_classes: int | None = None,
                     num_groups: int | None = None) -> FairnessReport:
    """Like demographic parity but conditioned on the true label order."""
    attrs = _as_int_vector(attrs, "attrs")
    labels = _as_int_vector(labels, "labels")
    predictions = _as_int_vector(predictions, "predictions")
    if not attrs.shape == labels.shape == predictions.shape:
        raise DataError("attrs, labels and predictions must have matching length")
    groups = _infer_groups(attrs, num_groups)
    k = _infer_classes(num_classes, labels, predictions)
    cells = _eo_cells(attrs, labels, predictions, groups, k, k)
    return eo_report_from_cells(cells)


def pairwise_eqodds_viol(attrs, labels, predictions, num_classes: int | None = None,
                         num_groups: int | None = None) -> FairnessReport:
    """Equal opportunity plus the matching non-strict comparison."""
    attrs = _as_int_vector(attrs, "attrs")
    labels = _as_int_vector(labels, "labels")
    predictions = _as_int_vector(predictions, "predictions")
    if not attrs.shape == labels.shape == predictions.shape:
        raise DataError("attrs, labels and predictions must have matching length")
    groups = _infer_groups(attrs, num_groups)
    k = _infer_classes(num_classes, labels, predictions)
    cells = _eo_cells(attrs, labels, predictions, groups, k, k)
    return eqodds_report_from_cells(cells)


def _rank_codes(scores) -> np.ndarray:
    """Dense-rank real scores to 1..m keeping the order; ties share a code."""
    scores = np.asarray(scores, dtype=float).reshape(-1)
    _, inverse = np.unique(scores, return_inverse=True)
    return (inverse + 1).astype(np.int64)


def scorer_dp_viol(attrs, scores, num_groups: int | None = None) -> FairnessReport:
    """Demographic parity of a real-valued scorer under strict comparisons.

    Tied scores count toward neither side of a comparison, exactly as tied
    predictions do for a discrete predictor.
    """
    return pairwise_dp_viol(attrs, _rank_codes(scores), num_groups=num_groups)


def scorer_eo_viol(attrs, labels, scores, num_groups: int | None = None) -> FairnessReport:
    """Equal opportunity of a real-valued scorer under strict comparisons."""
    attrs = _as_int_vector(attrs, "attrs")
    labels = _as_int_vector(labels, "labels")
    codes = _rank_codes(scores)
    if not attrs.shape == labels.shape == codes.shape:
        raise DataError("attrs, labels and scores must have matching length")
    groups = _infer_groups(attrs, num_groups)
    k_lab = _infer_classes(None, labels)
    cells = _eo_cells(attrs, labels, codes, groups, k_lab, int(codes.max()))
    return eo_report_from_cells(cells)


# ---------------------------------------------------------------------------
# naive oracles: walk every ordered index pair, count, divide once


def _oracle_pairs(notion, counters, num_groups) -> FairnessReport:
    pairs = []
    for a in range(num_groups):
        for b in range(num_groups):
            if a == b:
                continue
            fc, ft, bc, bt = counters[(a, b)]
            if ft > 0 and bt > 0:
                forward = fc / ft
                backward = bc / bt
                pairs.append(PairGap(a, b, forward, backward,
                                     pair_gap_value(fc, ft, bc, bt),
                                     True, fc, ft, bc, bt))
            else:
                pairs.append(PairGap(a, b, float("nan"), float("nan"), float("nan"), False))
    return _finish_report(notion, pairs, num_groups)


def pairwise_dp_viol_oracle(attrs, predictions, num_classes: int | None = None,
                            num_groups: int | None = None) -> FairnessReport:
    """Reference implementation over all ordered index pairs."""
    attrs = _as_int_vector(attrs, "attrs")
    predictions = _as_int_vector(predictions, "predictions")
    groups = _infer_groups(attrs, num_groups)
    n = len(attrs)
    counters = {(a, b): [0, 0, 0, 0] for a in range(groups) for b in range(groups)}
    for i in range(n):
        for j in range(n):
            c = counters[(int(attrs[i]), int(attrs[j]))]
            c[1] += 1
            c[3] += 1
            if predictions[i] > predictions[j]:
                c[0] += 1
            elif predictions[i] < predictions[j]:
                c[2] += 1
    return _oracle_pairs(FairnessNotion.PAIRWISE_DP, counters, groups)


def pairwise_eo_viol_oracle(attrs, labels, predictions, num_classes: int | None = None,
                            num_groups: int | None = None) -> FairnessReport:
    attrs = _as_int_vector(attrs, "attrs")
    labels = _as_int_vector(labels, "labels")
    predictions = _as_int_vector(predictions, "predictions")
    groups = _infer_groups(attrs, num_groups)
    n = len(attrs)
    counters = {(a, b): [0, 0, 0, 0] for a in range(groups) for b in range(groups)}
    for i in range(n):
        for j in range(n):
            c = counters[(int(attrs[i]), int(attrs[j]))]
            if labels[i] > labels[j]:
                c[1] += 1
                if predictions[i] > predictions[j]:
                    c[0] += 1
            elif labels[i] < labels[j]:
                c[3] += 1
                if predictions[i] < predictions[j]:
                    c[2] += 1
    return _oracle_pairs(FairnessNotion.PAIRWISE_EO, counters, groups)


def pairwise_eqodds_viol_oracle(attrs, labels, predictions, num_classes: int | None = None,
                                num_groups: int | None = None) -> FairnessReport:
    attrs = _as_int_vector(attrs, "attrs")
    labels = _as_int_vector(labels, "labels")
    predictions = _as_int_vector(predictions, "predictions")
    groups = _infer_groups(attrs, num_groups)
    n = len(attrs)
    strict = {(a, b): [0, 0, 0, 0] for a in range(groups) for b in range(groups)}
    weak = {(a, b): [0, 0, 0, 0] for a in range(groups) for b in range(groups)}
    for i in range(n):
        for j in range(n):
            key = (int(attrs[i]), int(attrs[j]))
            s, w = strict[key], weak[key]
            if labels[i] > labels[j]:
                s[1] += 1
                if predictions[i] > predictions[j]:
                    s[0] += 1
            elif labels[i] < labels[j]:
                s[3] += 1
                if predictions[i] < predictions[j]:
                    s[2] += 1
            if labels[i] <= labels[j]:
                w[1] += 1
                if predictions[i] <= predictions[j]:
                    w[0] += 1
            if labels[i] >= labels[j]:
                w[3] += 1
                if predictions[i] >= predictions[j]:
                    w[2] += 1
    pairs = []
    for a in range(groups):
        for b in range(groups):
            if a == b:
                continue
            fc, ft, bc, bt = strict[(a, b)]
            wfc, wft, wbc, wbt = weak[(a, b)]
            if ft > 0 and bt > 0:
                forward, backward = fc / ft, bc / bt
                fwd_weak = wfc / wft
                bwd_weak = wbc / wbt
                diff = max(pair_gap_value(fc, ft, bc, bt),
                           pair_gap_value(wfc, wft, wbc, wbt))
                pairs.append(PairGap(a, b, forward, backward, diff, True,
                                     fc, ft, bc, bt, fwd_weak, bwd_weak))
            else:
                pairs.append(PairGap(a, b, float("nan"), float("nan"), float("nan"), False))
    return _finish_report(FairnessNotion.PAIRWISE_EQ_ODDS, pairs, groups)


# ---------------------------------------------------------------------------
# per-sample criteria and cost


def standard_viol(notion: FairnessNotion, attrs, labels, predictions,
                  num_classes: int | None = None,
                  num_groups: int | None = None) -> float:
    """Max conditional-probability gap for the per-sample criteria.

    standard_dp compares P[f = v | a] across groups for every v; the
    equalized-odds variant additionally conditions on the true label. The
    binary standard equal-opportunity form conditions on label 1 and compares
    P[f = 1 | a, y = 1]; it is only defined for two classes.
    """
    attrs = _as_int_vector(attrs, "attrs")
    predictions = _as_int_vector(predictions, "predictions")
    groups = _infer_groups(attrs, num_groups)
    if notion == FairnessNotion.STANDARD_DP:
        k = _infer_classes(num_classes, predictions)
        cells = _dp_cells(attrs, predictions, groups, k).astype(float)
        totals = cells.sum(axis=1)
        live = np.flatnonzero(totals > 0)
        if len(live) < 2:
            if groups >= 2:
                raise DataError("standard_dp violation is undefined: fewer than "
                                "two populated groups")
            return 0.0
        probs = cells[live] / totals[live, None]
        return float(max(abs(probs[i, v] - probs[j, v])
                         for i in range(len(live)) for j in range(len(live))
                         for v in range(k) if i < j))
    labels = _as_int_vector(labels, "labels")
    k = _infer_classes(num_classes, labels, predictions)
    if notion == FairnessNotion.EQUALIZED_ODDS:
        cells = _eo_cells(attrs, labels, predictions, groups, k, k).astype(float)
        cond_totals = cells.sum(axis=2)  # (group, label)
        best = None
        for y in range(k):
            live = np.flatnonzero(cond_totals[:, y] > 0)
            for ia in range(len(live)):
                for ib in range(ia + 1, len(live)):
                    a, b = live[ia], live[ib]
                    pa = cells[a, y] / cond_totals[a, y]
                    pb = cells[b, y] / cond_totals[b, y]
                    gap = float(np.max(np.abs(pa - pb)))
                    best = gap if best is None else max(best, gap)
        if best is None:
            if groups >= 2:
                raise DataError("equalized-odds violation is undefined: no label "
                                "is shared by two groups")
            return 0.0
        return best
    if notion == FairnessNotion.STANDARD_EO:
        if k != 2:
            raise DataError("standard_eo is a binary criterion; got k != 2")
        best = None
        rates = []
        for a in range(groups):
            mask = (attrs == a) & (labels == 1)
            if mask.sum() > 0:
                rates.append(float(np.mean(predictions[mask] == 1)))
        if len(rates) < 2:
            if groups >= 2:
                raise DataError("standard_eo violation is undefined: fewer than "
                                "two groups have label-1 samples")
            return 0.0
        return float(max(rates) - min(rates))
    raise DataError(f"{notion} is not a per-sample criterion")


def expected_cost(labels, predictions, cost_matrix: CostMatrix) -> float:
    """Mean cost of the predictions under the given cost matrix."""
    labels = _as_int_vector(labels, "labels")
    predictions = _as_int_vector(predictions, "predictions")
    if labels.shape != predictions.shape:
        raise DataError("labels and predictions must have matching length")
    return float(np.mean(cost_matrix.values[labels - 1, predictions - 1]))


def margin_loss(scorer: LinearScorer, thresholds: Thresholds, dataset: Dataset,
                gamma: float = 0.0) -> float:
    """Fraction of per-threshold margins at or below gamma, averaged over samples.

    Sample i contributes one term per threshold j: the implied binary task
    "is the label above j" must clear the margin gamma on the correct side.
    At gamma = 0 this upper-bounds the absolute prediction error.
    """
    scores = scorer.score(dataset.features)
    theta = thresholds.theta
    j = np.arange(1, len(theta) + 1)
    sign = np.where(j[None, :] < dataset.labels[:, None], 1.0, -1.0)
    margins = sign * (scores[:, None] - theta[None, :])
    return float(np.mean(np.sum(margins <= gamma, axis=1)))


def group_stats(dataset: Dataset) -> GroupStats:
    """Group masses and P[y1 > y2 | a1, a2] for every ordered group pair."""
    groups = dataset.num_groups
    k = dataset.num_classes
    cells = _dp_cells(dataset.attrs, dataset.labels, groups, k)
    totals = cells.sum(axis=1)
    below = np.cumsum(cells, axis=1) - cells
    fwd = cells @ below.T
    rows = []
    for a in range(groups):
        for b in range(groups):
            if a == b:
                continue
            denom = totals[a] * totals[b]
            if denom > 0:
                greater = float(fwd[a, b]) / float(denom)
                less = float(fwd[b, a]) / float(denom)
                rows.append({"a1": a, "a2": b, "p_greater": greater,
                             "p_less": less, "diff": abs(greater - less)})
            else:
                rows.append({"a1": a, "a2": b, "p_greater": float("nan"),
                             "p_less": float("nan"), "diff": float("nan")})
    return GroupStats(group_probs=totals / dataset.n, pair_rows=tuple(rows))

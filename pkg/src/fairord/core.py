"""Core types for ordinal threshold models over protected groups.

A model is a linear scorer plus k-1 non-decreasing thresholds. The score
line is cut into k half-open cells and label i is predicted on the cell
(theta[i-1], theta[i]], with theta[0] = -inf and theta[k] = +inf implied.
Equal scores therefore always receive equal predictions.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np

__all__ = [
    "DataError",
    "GuardError",
    "FairnessNotion",
    "Dataset",
    "CostMatrix",
    "LinearScorer",
    "Thresholds",
    "ThresholdModel",
    "predictions_from_scores",
]


class DataError(ValueError):
    """Input data violates a structural requirement."""


class GuardError(RuntimeError):
    """An exact algorithm was invoked above its practical size guard."""


class FairnessNotion(str, Enum):
    """Closed set of supported fairness criteria."""

    PAIRWISE_DP = "pairwise_dp"
    PAIRWISE_EO = "pairwise_eo"
    PAIRWISE_EQ_ODDS = "pairwise_eq_odds"
    STANDARD_DP = "standard_dp"
    STANDARD_EO = "standard_eo"
    EQUALIZED_ODDS = "equalized_odds"


def _frozen_array(values, dtype) -> np.ndarray:
    out = np.array(values, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with ordinal labels in 1..k and group ids in 0..|A|-1.

    The group attribute is evaluation-side information: predictors never see
    it as an input feature.
    """

    features: np.ndarray
    labels: np.ndarray
    attrs: np.ndarray
    num_classes: int
    attribute_names: tuple[str, ...] = ()

    def __post_init__(self):
        features = np.atleast_2d(np.asarray(self.features, dtype=float))
        labels = np.asarray(self.labels, dtype=np.int64)
        attrs = np.asarray(self.attrs, dtype=np.int64)
        if features.ndim != 2:
            raise DataError("features must be a 2-d array")
        n = features.shape[0]
        if n == 0:
            raise DataError("dataset is empty")
        if labels.shape != (n,) or attrs.shape != (n,):
            raise DataError("features, labels and attrs must have matching length")
        if self.num_classes < 2:
            raise DataError("need at least 2 ordinal classes")
        if labels.min() < 1 or labels.max() > self.num_classes:
            raise DataError(f"labels must lie in 1..{self.num_classes}")
        if attrs.min() < 0:
            raise DataError("group ids must be non-negative")
        names = tuple(str(s) for s in self.attribute_names)
        if not names:
            names = tuple(f"group{g}" for g in range(int(attrs.max()) + 1))
        if attrs.max() >= len(names):
            raise DataError("group id exceeds the declared number of groups")
        object.__setattr__(self, "features", _frozen_array(features, float))
        object.__setattr__(self, "labels", _frozen_array(labels, np.int64))
        object.__setattr__(self, "attrs", _frozen_array(attrs, np.int64))
        object.__setattr__(self, "attribute_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_groups(self) -> int:
        return len(self.attribute_names)

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(
            features=self.features[index],
            labels=self.labels[index],
            attrs=self.attrs[index],
            num_classes=self.num_classes,
            attribute_names=self.attribute_names,
        )


@dataclass(frozen=True)
class CostMatrix:
    """k x k prediction cost with zero diagonal and V-shaped rows.

    Row y lists the cost of predicting 1..k when the truth is y; moving away
    from the diagonal never reduces cost.
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DataError("cost matrix must be square")
        k = values.shape[0]
        if k < 2:
            raise DataError("cost matrix needs at least 2 classes")
        if np.any(values < 0):
            raise DataError("costs must be non-negative")
        if np.any(np.diag(values) != 0):
            raise DataError("cost of a correct prediction must be 0")
        for r in range(k):
            row = values[r]
            if np.any(np.diff(row[: r + 1]) > 0):
                raise DataError("rows must be non-increasing left of the diagonal")
            if np.any(np.diff(row[r:]) < 0):
                raise DataError("rows must be non-decreasing right of the diagonal")
        object.__setattr__(self, "values", _frozen_array(values, float))

    @property
    def num_classes(self) -> int:
        return self.values.shape[0]

    def __call__(self, truth: int, predicted: int) -> float:
        return float(self.values[truth - 1, predicted - 1])

    @classmethod
    def absolute(cls, k: int) -> "CostMatrix":
        """|truth - predicted|, the mean-absolute-error cost."""
        idx = np.arange(k)
        return cls(np.abs(idx[:, None] - idx[None, :]).astype(float))

    @classmethod
    def binary(cls, k: int) -> "CostMatrix":
        """0/1 cost: every miss costs 1."""
        idx = np.arange(k)
        return cls((idx[:, None] != idx[None, :]).astype(float))

    @classmethod
    def asymmetric(cls, k: int) -> "CostMatrix":
        """Absolute cost with over-prediction penalized twice."""
        idx = np.arange(k)
        gap = np.abs(idx[:, None] - idx[None, :]).astype(float)
        return cls(gap + gap * (idx[None, :] > idx[:, None]))


@dataclass(frozen=True)
class LinearScorer:
    """Linear score s(x) = w . x (no intercept)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size == 0:
            raise DataError("scorer needs at least one weight")
        object.__setattr__(self, "weights", _frozen_array(w, float))

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def score(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        if features.ndim == 1:
            return np.asarray(features @ self.weights)
        return features @ self.weights


@dataclass(frozen=True)
class Thresholds:
    """Non-decreasing cut points theta_1 <= ... <= theta_{k-1}."""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if theta.size == 0:
            raise DataError("need at least one threshold")
        if np.any(np.diff(theta) < 0):
            raise DataError("thresholds must be non-decreasing")
        object.__setattr__(self, "theta", _frozen_array(theta, float))

    @property
    def num_classes(self) -> int:
        return self.theta.shape[0] + 1


def predictions_from_scores(scores: np.ndarray, thresholds: Thresholds) -> np.ndarray:
    """Map scores to labels: label i on the cell (theta[i-1], theta[i]].

    A score equal to a threshold falls in the lower cell, so label 1 is
    predicted iff score <= theta_1 and label k iff score > theta_{k-1}.
    """
    scores = np.asarray(scores, dtype=float)
    return 1 + np.searchsorted(thresholds.theta, scores, side="left")


@dataclass(frozen=True)
class ThresholdModel:
    """Scorer + thresholds + the feature standardization fitted on train data.

    Raw features are shifted/scaled per feature before scoring, so the model
    is self-contained at prediction time.
    """

    scorer: LinearScorer
    thresholds: Thresholds
    feature_means: np.ndarray
    feature_stds: np.ndarray
    notion: FairnessNotion | None = None
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        means = np.asarray(self.feature_means, dtype=float).reshape(-1)
        stds = np.asarray(self.feature_stds, dtype=float).reshape(-1)
        if means.shape != (self.scorer.dim,) or stds.shape != (self.scorer.dim,):
            raise DataError("normalizer shape must match the scorer dimension")
        if np.any(stds <= 0):
            raise DataError("feature scales must be positive")
        object.__setattr__(self, "feature_means", _frozen_array(means, float))
        object.__setattr__(self, "feature_stds", _frozen_array(stds, float))
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def num_classes(self) -> int:
        return self.thresholds.num_classes

    @property
    def dim(self) -> int:
        return self.scorer.dim

    @classmethod
    def plain(
        cls,
        weights,
        theta,
        notion: FairnessNotion | None = None,
        metadata: Mapping[str, object] | None = None,
    ) -> "ThresholdModel":
        """Model without feature standardization (identity normalizer)."""
        scorer = LinearScorer(np.asarray(weights, dtype=float))
        return cls(
            scorer=scorer,
            thresholds=Thresholds(np.asarray(theta, dtype=float)),
            feature_means=np.zeros(scorer.dim),
            feature_stds=np.ones(scorer.dim),
            notion=notion,
            metadata=metadata or {},
        )

    def normalize(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        return (features - self.feature_means) / self.feature_stds

    def scores(self, features: np.ndarray) -> np.ndarray:
        return self.scorer.score(self.normalize(features))

    def predict(self, x) -> int:
        return int(self.predictions(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def predictions(self, features: np.ndarray) -> np.ndarray:
        return predictions_from_scores(self.scores(features), self.thresholds)

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "k": self.num_classes,
            "w": [float(v) for v in self.scorer.weights],
            "theta": [float(v) for v in self.thresholds.theta],
            "feature_means": [float(v) for v in self.feature_means],
            "feature_stds": [float(v) for v in self.feature_stds],
            "notion": self.notion.value if self.notion is not None else None,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_json_dict(cls, payload: Mapping[str, object]) -> "ThresholdModel":
        try:
            w = np.asarray(payload["w"], dtype=float)
            theta = np.asarray(payload["theta"], dtype=float)
            means = np.asarray(payload["feature_means"], dtype=float)
            stds = np.asarray(payload["feature_stds"], dtype=float)
            notion = payload.get("notion")
            metadata = payload.get("metadata") or {}
            model = cls(
                scorer=LinearScorer(w),
                thresholds=Thresholds(theta),
                feature_means=means,
                feature_stds=stds,
                notion=FairnessNotion(notion) if notion else None,
                metadata=metadata,
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed model payload: {exc}") from exc
        if int(payload.get("dim", model.dim)) != model.dim:
            raise DataError("declared dim disagrees with the weight vector")
        if int(payload.get("k", model.num_classes)) != model.num_classes:
            raise DataError("declared k disagrees with the threshold count")
        return model

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "ThresholdModel":
        try:
            payload = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"model file is not valid JSON: {exc}") from exc
        return cls.from_json_dict(payload)

"""Shared random-instance generators for the test suite.

Instances use small integer features so that score comparisons and pairwise
differences are exact in float arithmetic; equality assertions between dual
implementations can then be literal, not tolerance-based.
"""
from __future__ import annotations

import numpy as np

from fairord.core import Dataset


def random_labels_attrs(rng: np.random.Generator, n: int, k: int, groups: int):
    labels = rng.integers(1, k + 1, size=n)
    attrs = rng.integers(0, groups, size=n)
    return labels, attrs


def random_predictions(rng: np.random.Generator, n: int, k: int):
    return rng.integers(1, k + 1, size=n)


def random_instance(rng: np.random.Generator, max_n: int = 30, max_k: int = 5,
                    max_groups: int = 3):
    """Labels, attrs and predictions for metric cross-checks."""
    n = int(rng.integers(1, max_n + 1))
    k = int(rng.integers(2, max_k + 1))
    groups = int(rng.integers(1, max_groups + 1))
    labels, attrs = random_labels_attrs(rng, n, k, groups)
    preds = random_predictions(rng, n, k)
    return attrs, labels, preds, k, groups


def random_dataset(rng: np.random.Generator, n: int, k: int, groups: int = 2,
                   dim: int = 3, feature_range: int = 5) -> Dataset:
    """Integer-featured dataset; scores under integer weights stay exact."""
    feats = rng.integers(-feature_range, feature_range + 1, size=(n, dim)).astype(float)
    labels, attrs = random_labels_attrs(rng, n, k, groups)
    # every group populated when possible, to keep pairwise criteria defined
    if n >= groups:
        attrs[:groups] = np.arange(groups)
    if n >= k:
        labels[:k] = np.arange(1, k + 1)
    return Dataset(feats, labels, attrs, num_classes=k)

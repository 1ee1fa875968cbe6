"""The ten confounding variables over training and test data.

The bias variables capture class imbalance before/after preprocessing, the
prop variables the share of code volume held by the 1% largest defective and
clean test artifacts ("super instances"), and the N variables the data sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from .dataset import ReleaseView
from .extmath import UNDEFINED, json_number, safe_div

CONFOUNDER_NAMES = (
    "bias_train",
    "bias_train_prime",
    "bias_test",
    "ratio_bias",
    "ratio_bias_prime",
    "prop_def_1pct",
    "prop_clean_1pct",
    "n_train",
    "n_train_prime",
    "n_test",
)


@dataclass(frozen=True)
class ConfounderVector:
    bias_train: float
    bias_train_prime: float
    bias_test: float
    ratio_bias: float
    ratio_bias_prime: float
    prop_def_1pct: float
    prop_clean_1pct: float
    n_train: float
    n_train_prime: float
    n_test: float

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_json_dict(self) -> dict:
        return {k: json_number(v) for k, v in self.to_dict().items()}


def top_share(sizes: Sequence[int], fraction: float = 0.01) -> float:
    """Size share of the ceil(fraction * n) largest items; undefined on empty input."""
    sizes = np.asarray(sizes, dtype=np.float64)
    if sizes.size == 0:
        return UNDEFINED
    m = math.ceil(fraction * sizes.size)
    top = np.sort(sizes)[::-1][:m]
    return safe_div(float(top.sum()), float(sizes.sum()))


def compute_confounders(
    train_labels: Sequence[int],
    train_prime_labels: Sequence[int],
    test_view: ReleaseView,
) -> ConfounderVector:
    """Confounders for one evaluation.

    ``train_labels`` are the defect labels of the raw training rows,
    ``train_prime_labels`` those after preprocessing (identical when no
    oversampling ran). Ratio variables are undefined when the corresponding
    training bias is zero.
    """
    train_labels = np.asarray(train_labels, dtype=np.int64)
    train_prime_labels = np.asarray(train_prime_labels, dtype=np.int64)
    if train_labels.size == 0 or train_prime_labels.size == 0 or test_view.n == 0:
        raise ValueError("confounders need non-empty train, preprocessed-train and test views")

    bias_train = float(train_labels.mean())
    bias_train_prime = float(train_prime_labels.mean())
    bias_test = float(test_view.y.mean())

    def_sizes = test_view.sizes[test_view.y == 1]
    clean_sizes = test_view.sizes[test_view.y == 0]

    return ConfounderVector(
        bias_train=bias_train,
        bias_train_prime=bias_train_prime,
        bias_test=bias_test,
        ratio_bias=bias_test / bias_train if bias_train > 0 else UNDEFINED,
        ratio_bias_prime=bias_test / bias_train_prime if bias_train_prime > 0 else UNDEFINED,
        prop_def_1pct=top_share(def_sizes),
        prop_clean_1pct=top_share(clean_sizes),
        n_train=float(train_labels.size),
        n_train_prime=float(train_prime_labels.size),
        n_test=float(test_view.n),
    )
